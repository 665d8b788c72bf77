use super::PulseError;

/// Phase of the closing π/2 pulse of a Hahn echo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoProjection {
    /// Same phase as the opening pulse: a zero-delay echo returns the initial state.
    Bright,
    /// Opposite phase.
    Dark,
}

impl EchoProjection {
    pub fn flipped(self) -> Self {
        match self {
            EchoProjection::Bright => EchoProjection::Dark,
            EchoProjection::Dark => EchoProjection::Bright,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            EchoProjection::Bright => 1.0,
            EchoProjection::Dark => -1.0,
        }
    }
}

/// What the RF-off half of an echo sequence plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoReference {
    /// No microwaves, like every other sequence.
    Off,
    /// The same echo with the closing π/2 phase flipped.
    Alternating,
}

/// Drive amplitude and pulse lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrowaveConfig {
    /// Rabi angular frequency in rad/s.
    pub rabi_omega: f64,
    pub pi_ns: u64,
    pub pi_half_ns: u64,
    pub echo_projection: EchoProjection,
    pub echo_reference: EchoReference,
}

impl Default for MicrowaveConfig {
    fn default() -> Self {
        Self {
            rabi_omega: 2.0 * std::f64::consts::PI * 1.0e6,
            pi_ns: 500,
            pi_half_ns: 250,
            echo_projection: EchoProjection::Bright,
            echo_reference: EchoReference::Off,
        }
    }
}

/// Repetition layout, all times in integer nanoseconds.
///
/// Each repetition starts with the laser pulse `[0, laser_width)`. Microwave
/// pulses end `guard` before the next repetition, so they must fit into
/// `rep_period - laser_width - guard`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    pub laser_width_ns: u64,
    pub guard_ns: u64,
    pub rep_period_ns: u64,
    pub envelope_freq_hz: f64,
    pub daq_period_ns: u64,
    pub apd_rise_delay_ns: u64,
    pub apd_window_ns: u64,
    pub mw: MicrowaveConfig,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            laser_width_ns: 1338,
            guard_ns: 1000,
            rep_period_ns: 6250,
            envelope_freq_hz: 8.0,
            daq_period_ns: 500,
            apd_rise_delay_ns: 50,
            apd_window_ns: 300,
            mw: MicrowaveConfig::default(),
        }
    }
}

impl TimingConfig {
    /// Half the envelope period in ns; errors unless it is a whole number.
    pub fn half_envelope_ns(&self) -> Result<u64, PulseError> {
        if !(self.envelope_freq_hz > 0.0) || !self.envelope_freq_hz.is_finite() {
            return Err(PulseError::InvalidTiming(
                "envelope frequency must be > 0".into(),
            ));
        }
        let half = 0.5e9 / self.envelope_freq_hz;
        let rounded = half.round();
        if (half - rounded).abs() > 1e-6 * half.max(1.0) || rounded < 1.0 {
            return Err(PulseError::NonIntegerReps {
                half_envelope_ns: half,
                rep_period_ns: self.rep_period_ns,
            });
        }
        Ok(rounded as u64)
    }

    pub fn reps_per_half_envelope(&self) -> Result<u64, PulseError> {
        let half = self.half_envelope_ns()?;
        if self.rep_period_ns == 0 || half % self.rep_period_ns != 0 {
            return Err(PulseError::NonIntegerReps {
                half_envelope_ns: half as f64,
                rep_period_ns: self.rep_period_ns,
            });
        }
        Ok(half / self.rep_period_ns)
    }

    /// Time available for microwave pulses in each repetition.
    pub fn mw_window_ns(&self) -> u64 {
        self.rep_period_ns
            .saturating_sub(self.laser_width_ns + self.guard_ns)
    }

    pub fn validate(&self) -> Result<(), PulseError> {
        if self.laser_width_ns == 0 {
            return Err(PulseError::InvalidTiming("laser width must be > 0".into()));
        }
        if self.laser_width_ns + self.guard_ns > self.rep_period_ns {
            return Err(PulseError::InvalidTiming(format!(
                "laser {} ns + guard {} ns exceed the repetition period {} ns",
                self.laser_width_ns, self.guard_ns, self.rep_period_ns
            )));
        }
        if self.daq_period_ns == 0 || self.apd_window_ns == 0 {
            return Err(PulseError::InvalidTiming(
                "DAQ period and APD window must be > 0".into(),
            ));
        }
        if self.apd_rise_delay_ns + self.apd_window_ns > self.rep_period_ns {
            return Err(PulseError::InvalidTiming(
                "APD gate runs past the repetition".into(),
            ));
        }
        if !(self.mw.rabi_omega >= 0.0) || !self.mw.rabi_omega.is_finite() {
            return Err(PulseError::InvalidTiming(
                "Rabi frequency must be finite and >= 0".into(),
            ));
        }
        self.reps_per_half_envelope()?;
        Ok(())
    }

    pub(crate) fn check_mw_fits(&self, mw_total_ns: u64) -> Result<(), PulseError> {
        let available = self.mw_window_ns();
        if mw_total_ns > available {
            return Err(PulseError::GuardViolation {
                needed_ns: mw_total_ns + self.guard_ns,
                available_ns: available + self.guard_ns,
            });
        }
        Ok(())
    }
}
