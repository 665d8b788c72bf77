use std::path::Path;

use super::OpticsError;

/// Piecewise-linear table over wavelength in nm.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable {
    knots_nm: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, OpticsError> {
        if points.len() < 2 {
            return Err(OpticsError::InvalidTable("need at least two knots".into()));
        }
        let (knots_nm, values): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if knots_nm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(OpticsError::InvalidTable(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(OpticsError::InvalidTable(
                "values must be finite and >= 0".into(),
            ));
        }
        Ok(Self { knots_nm, values })
    }

    /// Parses a two-column `wavelength_nm value` table. Blank lines and
    /// lines starting with `#` are skipped; columns may be separated by
    /// whitespace or a comma.
    pub fn parse(text: &str) -> Result<Self, OpticsError> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(OpticsError::InvalidTable(format!(
                    "line {}: expected two columns",
                    n + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    OpticsError::InvalidTable(format!("line {}: `{s}` is not a number", n + 1))
                })
            };
            points.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self, OpticsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OpticsError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# wavelength_nm value\n");
        for (x, y) in self.knots_nm.iter().zip(&self.values) {
            s.push_str(&format!("{x} {y}\n"));
        }
        s
    }

    pub fn domain_nm(&self) -> (f64, f64) {
        (self.knots_nm[0], *self.knots_nm.last().unwrap())
    }

    pub fn eval(&self, nm: f64) -> Result<f64, OpticsError> {
        let (lo, hi) = self.domain_nm();
        if !(nm >= lo && nm <= hi) {
            return Err(OpticsError::WavelengthOutOfRange { nm, lo, hi });
        }
        let k = self
            .knots_nm
            .partition_point(|&x| x <= nm)
            .clamp(1, self.knots_nm.len() - 1);
        let (x0, x1) = (self.knots_nm[k - 1], self.knots_nm[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        Ok(y0 + (y1 - y0) * (nm - x0) / (x1 - x0))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            knots_nm: self.knots_nm.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn constant(value: f64, lo_nm: f64, hi_nm: f64) -> Self {
        Self {
            knots_nm: vec![lo_nm, hi_nm],
            values: vec![value, value],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.knots_nm
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Non-increasing for every knot at or above `from_nm`.
    pub fn is_non_increasing_from(&self, from_nm: f64) -> bool {
        let pts: Vec<_> = self.points().filter(|(x, _)| *x >= from_nm).collect();
        pts.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// Zero-phonon line of the V2 center.
pub const ZPL_NM: f64 = 917.0;

/// Wavelength-dependent optical response of the defect and the host.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    /// Relative ground-to-excited cross-section, 1 at the ZPL.
    pub excitation: SpectralTable,
    /// Relative excited-state ionization efficiency.
    pub ionization: SpectralTable,
    /// Laser-induced background photocurrent in A/W.
    pub background: SpectralTable,
}

const DEFAULT_EXCITATION: [(f64, f64); 31] = [
    (760.0, 0.80),
    (770.0, 0.81),
    (780.0, 0.82),
    (790.0, 0.83),
    (800.0, 0.84),
    (810.0, 0.85),
    (820.0, 0.86),
    (830.0, 0.87),
    (840.0, 0.88),
    (850.0, 0.89),
    (860.0, 0.90),
    (870.0, 0.92),
    (880.0, 0.94),
    (890.0, 0.96),
    (900.0, 0.98),
    (910.0, 0.99),
    (ZPL_NM, 1.00),
    (920.0, 0.97),
    (930.0, 0.85),
    (940.0, 0.62),
    (950.0, 0.42),
    (960.0, 0.27),
    (970.0, 0.17),
    (980.0, 0.10),
    (990.0, 0.055),
    (1000.0, 0.03),
    (1010.0, 0.017),
    (1020.0, 0.010),
    (1030.0, 0.006),
    (1040.0, 0.004),
    (1050.0, 0.003),
];

/// Background relative to its 890 nm value.
const DEFAULT_BACKGROUND_SHAPE: [(f64, f64); 30] = [
    (760.0, 3.60),
    (770.0, 3.30),
    (780.0, 3.00),
    (790.0, 2.60),
    (800.0, 2.30),
    (810.0, 2.00),
    (820.0, 1.80),
    (830.0, 1.60),
    (840.0, 1.45),
    (850.0, 1.32),
    (860.0, 1.20),
    (870.0, 1.10),
    (880.0, 1.04),
    (890.0, 1.00),
    (900.0, 0.96),
    (910.0, 0.93),
    (920.0, 0.90),
    (930.0, 0.87),
    (940.0, 0.84),
    (950.0, 0.80),
    (960.0, 0.75),
    (970.0, 0.70),
    (980.0, 0.64),
    (990.0, 0.58),
    (1000.0, 0.52),
    (1010.0, 0.46),
    (1020.0, 0.41),
    (1030.0, 0.37),
    (1040.0, 0.33),
    (1050.0, 0.30),
];

/// Background at 890 nm for the thin-film device, A/W.
pub const DEFAULT_BACKGROUND_890_A_PER_W: f64 = 5.0e-8;

impl SpectralModel {
    /// Calibration tables covering 760-1050 nm.
    pub fn default_tables() -> Self {
        let excitation = SpectralTable::new(DEFAULT_EXCITATION.to_vec()).expect("static table");
        let ionization = SpectralTable::new(
            (0..30)
                .map(|k| {
                    let nm = 760.0 + 10.0 * k as f64;
                    (nm, 1.0 - 0.0014 * (nm - 760.0))
                })
                .collect(),
        )
        .expect("static table");
        let background = SpectralTable::new(
            DEFAULT_BACKGROUND_SHAPE
                .iter()
                .map(|&(x, y)| (x, y * DEFAULT_BACKGROUND_890_A_PER_W))
                .collect(),
        )
        .expect("static table");
        Self {
            excitation,
            ionization,
            background,
        }
    }

    /// Wavelength-independent curves, useful as a null model.
    pub fn flat(excitation: f64, ionization: f64, background_a_per_w: f64) -> Self {
        Self {
            excitation: SpectralTable::constant(excitation, 760.0, 1050.0),
            ionization: SpectralTable::constant(ionization, 760.0, 1050.0),
            background: SpectralTable::constant(background_a_per_w, 760.0, 1050.0),
        }
    }

    pub fn with_background_scale(mut self, factor: f64) -> Self {
        self.background = self.background.scaled(factor);
        self
    }

    /// Checks coverage of `[lo_nm, hi_nm]` and a non-increasing background above 780 nm.
    pub fn validate(&self, lo_nm: f64, hi_nm: f64) -> Result<(), OpticsError> {
        for (name, t) in [
            ("excitation", &self.excitation),
            ("ionization", &self.ionization),
            ("background", &self.background),
        ] {
            let (a, b) = t.domain_nm();
            if a > lo_nm || b < hi_nm {
                return Err(OpticsError::InvalidTable(format!(
                    "{name} table covers {a}-{b} nm, needs {lo_nm}-{hi_nm} nm"
                )));
            }
        }
        if !self.background.is_non_increasing_from(780.0) {
            return Err(OpticsError::InvalidTable(
                "background must not increase above 780 nm".into(),
            ));
        }
        Ok(())
    }
}
