//! Dialect definitions: operator vocabularies and grouped-operator metadata.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The three cell-encoding conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dialect {
    Nb101,
    Nb201,
    Nb301,
}

impl Dialect {
    pub const ALL: [Dialect; 3] = [Dialect::Nb101, Dialect::Nb201, Dialect::Nb301];

    pub fn tag(self) -> &'static str {
        match self {
            Dialect::Nb101 => "nb101",
            Dialect::Nb201 => "nb201",
            Dialect::Nb301 => "nb301",
        }
    }

    /// Grouped-operator labels of this dialect's vocabulary.
    pub fn vocabulary(self) -> &'static [&'static str] {
        match self {
            Dialect::Nb101 => &["conv1x1", "conv3x3", "maxpool3x3"],
            Dialect::Nb201 => &["zeroize", "skip", "conv1x1", "conv3x3", "avgpool3x3"],
            Dialect::Nb301 => &[
                "zeroize",
                "skip",
                "sep3x3",
                "sep5x5",
                "dil3x3",
                "dil5x5",
                "avgpool3x3",
                "maxpool3x3",
            ],
        }
    }

    /// Number of primitive nodes a label expands to (zeroize and skip expand to none).
    pub fn grouped_node_count(self, label: &str) -> Option<usize> {
        let count = match (self, label) {
            (Dialect::Nb101, "conv1x1") => 3,
            (Dialect::Nb101, "conv3x3") => 3,
            (Dialect::Nb101, "maxpool3x3") => 1,
            (Dialect::Nb201, "zeroize") => 0,
            (Dialect::Nb201, "skip") => 0,
            (Dialect::Nb201, "conv1x1") => 3,
            (Dialect::Nb201, "conv3x3") => 3,
            (Dialect::Nb201, "avgpool3x3") => 1,
            (Dialect::Nb301, "zeroize") => 0,
            (Dialect::Nb301, "skip") => 0,
            (Dialect::Nb301, "sep3x3") => 8,
            (Dialect::Nb301, "sep5x5") => 8,
            (Dialect::Nb301, "dil3x3") => 4,
            (Dialect::Nb301, "dil5x5") => 4,
            (Dialect::Nb301, "avgpool3x3") => 1,
            (Dialect::Nb301, "maxpool3x3") => 1,
            _ => return None,
        };
        Some(count)
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Dialect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nb101" => Ok(Dialect::Nb101),
            "nb201" => Ok(Dialect::Nb201),
            "nb301" => Ok(Dialect::Nb301),
            other => Err(Error::Parse(format!("unknown dialect `{other}`"))),
        }
    }
}

macro_rules! op_enum {
    ($name:ident, $dialect:expr, { $($variant:ident => $label:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(Error::UnknownLabel {
                        dialect: $dialect.to_string(),
                        label: other.to_string(),
                    }),
                }
            }
        }
    };
}

op_enum!(Nb101Op, Dialect::Nb101, {
    Conv1x1 => "conv1x1",
    Conv3x3 => "conv3x3",
    MaxPool3x3 => "maxpool3x3",
});

op_enum!(Nb201Op, Dialect::Nb201, {
    Zeroize => "zeroize",
    Skip => "skip",
    Conv1x1 => "conv1x1",
    Conv3x3 => "conv3x3",
    AvgPool3x3 => "avgpool3x3",
});

op_enum!(Nb301Op, Dialect::Nb301, {
    Zeroize => "zeroize",
    Skip => "skip",
    Sep3x3 => "sep3x3",
    Sep5x5 => "sep5x5",
    Dil3x3 => "dil3x3",
    Dil5x5 => "dil5x5",
    AvgPool3x3 => "avgpool3x3",
    MaxPool3x3 => "maxpool3x3",
});

/// The full `nb201` edge-operator vocabulary.
pub const NB201_FULL_VOCAB: &[Nb201Op] = Nb201Op::ALL;

/// The zeroize-free `nb201` vocabulary; the resulting space of 4^6 = 4096 cells is
/// small enough to enumerate exhaustively.
pub const NB201_NO_ZEROIZE_VOCAB: &[Nb201Op] = &[
    Nb201Op::Skip,
    Nb201Op::Conv1x1,
    Nb201Op::Conv3x3,
    Nb201Op::AvgPool3x3,
];
