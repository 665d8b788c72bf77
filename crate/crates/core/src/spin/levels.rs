use std::fmt;

/// Number of levels in the reduced V2 model.
pub const N_LEVELS: usize = 10;

/// One level of the reduced silicon-vacancy model.
///
/// Ground and excited quartets carry their spin projection; the metastable
/// state and the ionized bookkeeping level (V0 plus a conduction electron)
/// carry none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    GroundPlus3Half,
    GroundPlus1Half,
    GroundMinus1Half,
    GroundMinus3Half,
    ExcitedPlus3Half,
    ExcitedPlus1Half,
    ExcitedMinus1Half,
    ExcitedMinus3Half,
    Metastable,
    Ionized,
}

impl Level {
    pub const ALL: [Level; N_LEVELS] = [
        Level::GroundPlus3Half,
        Level::GroundPlus1Half,
        Level::GroundMinus1Half,
        Level::GroundMinus3Half,
        Level::ExcitedPlus3Half,
        Level::ExcitedPlus1Half,
        Level::ExcitedMinus1Half,
        Level::ExcitedMinus3Half,
        Level::Metastable,
        Level::Ionized,
    ];

    pub const GROUND: [Level; 4] = [
        Level::GroundPlus3Half,
        Level::GroundPlus1Half,
        Level::GroundMinus1Half,
        Level::GroundMinus3Half,
    ];

    pub const EXCITED: [Level; 4] = [
        Level::ExcitedPlus3Half,
        Level::ExcitedPlus1Half,
        Level::ExcitedMinus1Half,
        Level::ExcitedMinus3Half,
    ];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    /// Spin projection `m_S` for quartet levels.
    pub fn spin_projection(self) -> Option<f64> {
        use Level::*;
        match self {
            GroundPlus3Half | ExcitedPlus3Half => Some(1.5),
            GroundPlus1Half | ExcitedPlus1Half => Some(0.5),
            GroundMinus1Half | ExcitedMinus1Half => Some(-0.5),
            GroundMinus3Half | ExcitedMinus3Half => Some(-1.5),
            Metastable | Ionized => None,
        }
    }

    pub fn is_ground(self) -> bool {
        self.index() < 4
    }

    pub fn is_excited(self) -> bool {
        (4..8).contains(&self.index())
    }

    /// Excited-state partner of a ground sublevel (and vice versa).
    pub fn optical_partner(self) -> Option<Level> {
        let i = self.index();
        match i {
            0..=3 => Level::from_index(i + 4),
            4..=7 => Level::from_index(i - 4),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        use Level::*;
        match self {
            GroundPlus3Half => "g(+3/2)",
            GroundPlus1Half => "g(+1/2)",
            GroundMinus1Half => "g(-1/2)",
            GroundMinus3Half => "g(-3/2)",
            ExcitedPlus3Half => "e(+3/2)",
            ExcitedPlus1Half => "e(+1/2)",
            ExcitedMinus1Half => "e(-1/2)",
            ExcitedMinus3Half => "e(-3/2)",
            Metastable => "M",
            Ionized => "ION",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The fixed, ordered level basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelBasis;

impl LevelBasis {
    pub fn labels(&self) -> [&'static str; N_LEVELS] {
        Level::ALL.map(Level::label)
    }

    pub fn len(&self) -> usize {
        N_LEVELS
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, level: Level) -> usize {
        level.index()
    }

    pub fn lookup(&self, label: &str) -> Option<Level> {
        Level::ALL.into_iter().find(|l| l.label() == label)
    }
}
