//! Expansion of grouped operator labels into primitive-node chains.

use super::dialect::{Dialect, Nb101Op, Nb201Op, Nb301Op};
use crate::cg::{OpAttrs, OpKind, PrimitiveOp, Shape, WeightShape};
use crate::error::{Error, Result};

/// One node of a linear primitive chain; consecutive chain nodes are connected.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainNode {
    pub op: PrimitiveOp,
    pub in_shape: Shape,
    pub out_shape: Shape,
    pub weight_shape: Option<WeightShape>,
}

pub(crate) struct ChainBuilder {
    shape: Shape,
    nodes: Vec<ChainNode>,
}

impl ChainBuilder {
    pub(crate) fn new(in_shape: Shape) -> Self {
        ChainBuilder {
            shape: in_shape,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, op: PrimitiveOp, out_shape: Shape, weight_shape: Option<WeightShape>) {
        self.nodes.push(ChainNode {
            op,
            in_shape: self.shape,
            out_shape,
            weight_shape,
        });
        self.shape = out_shape;
    }

    pub(crate) fn relu(&mut self) {
        self.push(PrimitiveOp::plain(OpKind::ReLU), self.shape, None);
    }

    pub(crate) fn batch_norm(&mut self) {
        let c = self.shape.c;
        self.push(
            PrimitiveOp {
                kind: OpKind::BatchNorm,
                attributes: OpAttrs::biased(),
            },
            self.shape,
            Some(WeightShape::from((1, 1, 1, c))),
        );
    }

    pub(crate) fn conv(&mut self, kernel: u32, out_channels: u32, groups: u32, dilation: u32) {
        let cin = self.shape.c;
        debug_assert!(cin % groups == 0);
        self.push(
            PrimitiveOp {
                kind: OpKind::Conv2D,
                attributes: OpAttrs::conv(kernel, 1, groups, dilation),
            },
            self.shape.with_channels(out_channels),
            Some(WeightShape::from((kernel, kernel, cin / groups, out_channels))),
        );
    }

    pub(crate) fn pool(&mut self, kind: OpKind, kernel: u32, stride: u32) {
        debug_assert!(matches!(kind, OpKind::MaxPool | OpKind::AvgPool));
        let out = Shape::new(self.shape.h / stride, self.shape.w / stride, self.shape.c);
        self.push(
            PrimitiveOp {
                kind,
                attributes: OpAttrs::pool(kernel, stride),
            },
            out,
            None,
        );
    }

    pub(crate) fn finish(self) -> Vec<ChainNode> {
        self.nodes
    }
}

pub(crate) fn expand_nb101(op: Nb101Op, in_shape: Shape, out_channels: u32) -> Vec<ChainNode> {
    let mut c = ChainBuilder::new(in_shape);
    match op {
        Nb101Op::Conv1x1 => {
            c.conv(1, out_channels, 1, 1);
            c.batch_norm();
            c.relu();
        }
        Nb101Op::Conv3x3 => {
            c.conv(3, out_channels, 1, 1);
            c.batch_norm();
            c.relu();
        }
        Nb101Op::MaxPool3x3 => c.pool(OpKind::MaxPool, 3, 1),
    }
    c.finish()
}

pub(crate) fn expand_nb201(op: Nb201Op, in_shape: Shape, out_channels: u32) -> Result<Vec<ChainNode>> {
    let mut c = ChainBuilder::new(in_shape);
    match op {
        Nb201Op::Zeroize => return Err(Error::ZeroizeExpansion),
        Nb201Op::Skip => {}
        Nb201Op::Conv1x1 => {
            c.relu();
            c.conv(1, out_channels, 1, 1);
            c.batch_norm();
        }
        Nb201Op::Conv3x3 => {
            c.relu();
            c.conv(3, out_channels, 1, 1);
            c.batch_norm();
        }
        Nb201Op::AvgPool3x3 => c.pool(OpKind::AvgPool, 3, 1),
    }
    Ok(c.finish())
}

pub(crate) fn expand_nb301(op: Nb301Op, in_shape: Shape, out_channels: u32) -> Result<Vec<ChainNode>> {
    let cin = in_shape.c;
    let mut c = ChainBuilder::new(in_shape);
    // Separable pairs are depthwise-then-pointwise: the first conv of each pair has
    // groups equal to its input channels, the second is 1x1. The first pair keeps the
    // input width; only the second pair moves to `out_channels`. Dilated pairs use a
    // dilated full convolution followed by a 1x1.
    let sep = |c: &mut ChainBuilder, kernel: u32| {
        c.relu();
        c.conv(kernel, cin, cin, 1);
        c.conv(1, cin, 1, 1);
        c.batch_norm();
        c.relu();
        c.conv(kernel, cin, cin, 1);
        c.conv(1, out_channels, 1, 1);
        c.batch_norm();
    };
    let dil = |c: &mut ChainBuilder, kernel: u32| {
        c.relu();
        c.conv_dilated(kernel, cin, 2);
        c.conv(1, out_channels, 1, 1);
        c.batch_norm();
    };
    match op {
        Nb301Op::Zeroize => return Err(Error::ZeroizeExpansion),
        Nb301Op::Skip => {}
        Nb301Op::Sep3x3 => sep(&mut c, 3),
        Nb301Op::Sep5x5 => sep(&mut c, 5),
        Nb301Op::Dil3x3 => dil(&mut c, 3),
        Nb301Op::Dil5x5 => dil(&mut c, 5),
        Nb301Op::AvgPool3x3 => c.pool(OpKind::AvgPool, 3, 1),
        Nb301Op::MaxPool3x3 => c.pool(OpKind::MaxPool, 3, 1),
    }
    Ok(c.finish())
}

impl ChainBuilder {
    fn conv_dilated(&mut self, kernel: u32, out_channels: u32, dilation: u32) {
        self.conv(kernel, out_channels, 1, dilation);
    }
}

/// Expand a grouped operator label into its primitive chain with propagated shapes.
///
/// `zeroize` has no expansion: it drops a connection, which only cell lowering can
/// express, so requesting it here is an error.
pub fn expand_operator(
    dialect: Dialect,
    label: &str,
    in_shape: Shape,
    out_channels: u32,
) -> Result<Vec<ChainNode>> {
    let unknown = || Error::UnknownLabel {
        dialect: dialect.to_string(),
        label: label.to_string(),
    };
    match dialect {
        Dialect::Nb101 => {
            let op: Nb101Op = label.parse().map_err(|_| unknown())?;
            Ok(expand_nb101(op, in_shape, out_channels))
        }
        Dialect::Nb201 => {
            let op: Nb201Op = label.parse().map_err(|_| unknown())?;
            expand_nb201(op, in_shape, out_channels)
        }
        Dialect::Nb301 => {
            let op: Nb301Op = label.parse().map_err(|_| unknown())?;
            expand_nb301(op, in_shape, out_channels)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(chain: &[ChainNode]) -> Vec<OpKind> {
        chain.iter().map(|n| n.op.kind).collect()
    }

    #[test]
    fn nb201_conv3x3_expands_to_relu_conv_bn() {
        let chain =
            expand_operator(Dialect::Nb201, "conv3x3", Shape::new(32, 32, 16), 16).unwrap();
        assert_eq!(
            kinds(&chain),
            vec![OpKind::ReLU, OpKind::Conv2D, OpKind::BatchNorm]
        );
        assert_eq!(chain[1].op.attributes.kernel_h, Some(3));
        assert_eq!(chain[2].out_shape, Shape::new(32, 32, 16));
    }

    #[test]
    fn nb301_sep5x5_expands_to_eight_nodes() {
        let chain = expand_operator(Dialect::Nb301, "sep5x5", Shape::new(32, 32, 16), 16).unwrap();
        assert_eq!(
            kinds(&chain),
            vec![
                OpKind::ReLU,
                OpKind::Conv2D,
                OpKind::Conv2D,
                OpKind::BatchNorm,
                OpKind::ReLU,
                OpKind::Conv2D,
                OpKind::Conv2D,
                OpKind::BatchNorm,
            ]
        );
        // depthwise first, pointwise second in each pair
        assert_eq!(chain[1].op.attributes.groups, Some(16));
        assert_eq!(chain[1].weight_shape, Some(WeightShape::from((5, 5, 1, 16))));
        assert_eq!(chain[2].op.attributes.kernel_h, Some(1));
        assert_eq!(chain[5].op.attributes.groups, Some(16));
        assert_eq!(chain[6].op.attributes.kernel_h, Some(1));
    }

    #[test]
    fn nb301_dilated_pair_carries_dilation_then_1x1() {
        let chain = expand_operator(Dialect::Nb301, "dil3x3", Shape::new(32, 32, 16), 16).unwrap();
        assert_eq!(chain.len(), 4);
        assert_eq!(chain[1].op.attributes.dilation, Some(2));
        assert_eq!(chain[1].op.attributes.groups, Some(1));
        assert_eq!(chain[2].op.attributes.kernel_h, Some(1));
    }

    #[test]
    fn nb101_maxpool_is_one_node() {
        let chain =
            expand_operator(Dialect::Nb101, "maxpool3x3", Shape::new(8, 8, 64), 64).unwrap();
        assert_eq!(kinds(&chain), vec![OpKind::MaxPool]);
        assert_eq!(chain[0].out_shape, Shape::new(8, 8, 64));
    }

    #[test]
    fn grouped_node_counts_match_the_table() {
        let shape = Shape::new(32, 32, 16);
        for dialect in Dialect::ALL {
            for label in dialect.vocabulary() {
                let expected = dialect.grouped_node_count(label).unwrap();
                match expand_operator(dialect, label, shape, 16) {
                    Ok(chain) => assert_eq!(chain.len(), expected, "{dialect} {label}"),
                    Err(Error::ZeroizeExpansion) => {
                        assert_eq!(expected, 0, "{dialect} {label}")
                    }
                    Err(e) => panic!("{dialect} {label}: {e}"),
                }
            }
        }
    }

    #[test]
    fn unknown_label_is_an_error() {
        assert!(matches!(
            expand_operator(Dialect::Nb101, "sep3x3", Shape::new(8, 8, 8), 8),
            Err(Error::UnknownLabel { .. })
        ));
    }
}
