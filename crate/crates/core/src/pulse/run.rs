use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::sequence::{PulseSequence, RepTemplate};
use super::PulseError;
use crate::detector::{
    laser_factor, poisson_count, shot_noise_sigma, ApdConfig, NoiseConfig, SampleSink, TiaConfig,
    TiaState, TraceKind, TraceRecord,
};
use crate::optics::{photon_rate, EnsembleSpec, OpticalRates, ELEMENTARY_CHARGE};
use crate::spin::{
    rotating_hamiltonian_signed, DensityMatrix, DissipatorSet, Level, Rk4Stepper,
    SpinHamiltonianParams,
};

/// Time after the laser turns off during which the excited state is still
/// resolved at 1 ns.
const TAIL_NS: u64 = 50;
/// Filter time constants of RF-off warm-up before the first sample.
const WARMUP_TIME_CONSTANTS: f64 = 25.0;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Largest step outside the laser pulse and its tail.
const COARSE_DT: f64 = 10e-9;
/// Largest coherent phase advance per driven step, rad.
const MAX_PHASE_STEP: f64 = 0.2;
/// Repetition-to-repetition change at which a half envelope counts as periodic.
const PERIODIC_TOL: f64 = 1e-11;
const MAX_TRANSIENT_REPS: usize = 2000;

/// Defect physics for a simulated acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsBundle {
    /// `rf_freq_hz` and `rabi_omega` are taken from each sequence.
    pub spin: SpinHamiltonianParams,
    /// Intrinsic rates; the optical fields are replaced by `optical`.
    pub rates: DissipatorSet<f64>,
    /// Rates while the laser is on; recombination acts at all times.
    pub optical: OpticalRates,
    /// Drive the doublet nearest to each sequence's RF frequency.
    pub auto_frame: bool,
    pub ensemble: EnsembleSpec,
    /// Laser-induced background photocurrent while the laser is on, A.
    pub background_current_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorBundle {
    pub tia: TiaConfig,
    pub apd: ApdConfig,
    pub noise: NoiseConfig,
    pub electrical: bool,
    pub optical: bool,
}

impl Default for DetectorBundle {
    fn default() -> Self {
        Self {
            tia: TiaConfig::default(),
            apd: ApdConfig::default(),
            noise: NoiseConfig::default(),
            electrical: true,
            optical: true,
        }
    }
}

/// Per-defect event totals of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RepProfile {
    /// Cumulative ionization events at each whole ns from the repetition
    /// start; constant after the last entry.
    pub ionization_cum: Vec<f64>,
    /// Photons emitted inside the APD gate.
    pub gate_emission: f64,
}

impl RepProfile {
    #[inline]
    pub fn ionization_at(&self, t_ns: u64) -> f64 {
        let i = (t_ns as usize).min(self.ionization_cum.len() - 1);
        self.ionization_cum[i]
    }

    pub fn ionization_total(&self) -> f64 {
        *self.ionization_cum.last().unwrap()
    }
}

/// Repetitions of one envelope half: the transient after the envelope
/// switches, then a periodic repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfProfile {
    pub transient: Vec<RepProfile>,
    pub steady: RepProfile,
    pub converged: bool,
}

impl HalfProfile {
    pub fn rep(&self, r: usize) -> &RepProfile {
        self.transient.get(r).unwrap_or(&self.steady)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceProfiles {
    pub high: HalfProfile,
    pub low: HalfProfile,
}

impl SequenceProfiles {
    pub fn half(&self, rf_on: bool) -> &HalfProfile {
        if rf_on {
            &self.high
        } else {
            &self.low
        }
    }
}

struct Propagator {
    stepper: Rk4Stepper<f64>,
    /// Substeps per ns on the fine grid.
    sub: u32,
    /// Step for coarse drive-free intervals, s.
    coarse_dt: f64,
}

struct RepSimulator<'a> {
    seq: &'a PulseSequence,
    phys: &'a PhysicsBundle,
    params: SpinHamiltonianParams,
    cache: HashMap<(bool, u64), Propagator>,
    laser_end: u64,
    span: u64,
    gate: (u64, u64),
}

impl<'a> RepSimulator<'a> {
    fn new(seq: &'a PulseSequence, phys: &'a PhysicsBundle) -> Self {
        let mut params = SpinHamiltonianParams {
            rf_freq_hz: seq.rf_freq_hz,
            ..phys.spin
        };
        if phys.auto_frame {
            params.frame = params.nearest_transition(seq.rf_freq_hz);
        }
        let laser_end = seq.high.laser.iter().map(|s| s.t_end_ns).max().unwrap_or(0);
        let span = (laser_end + TAIL_NS).min(seq.rep_period_ns);
        let gate = (
            seq.apd_rise_delay_ns,
            seq.apd_rise_delay_ns + seq.apd_window_ns,
        );
        Self {
            seq,
            phys,
            params,
            cache: HashMap::new(),
            laser_end,
            span,
            gate,
        }
    }

    fn propagator(&mut self, laser_on: bool, omega: f64) -> &Propagator {
        let (phys, params) = (self.phys, self.params);
        self.cache
            .entry((laser_on, omega.to_bits()))
            .or_insert_with(|| {
                let o = &phys.optical;
                let rates = if laser_on {
                    phys.rates.with_optical(o.pump, o.ionize, o.recombine)
                } else {
                    phys.rates.with_optical(0.0, 0.0, o.recombine)
                };
                let h = rotating_hamiltonian_signed::<f64>(&params, omega);
                let fastest = rates.max_rate();
                let detuning = 2.0
                    * std::f64::consts::PI
                    * (params.transition_frequency(params.frame) - params.rf_freq_hz);
                let coherent = if omega != 0.0 {
                    omega.hypot(detuning)
                } else {
                    0.0
                };
                let per_ns = (fastest * 1e-9 / 2.0).max(coherent * 1e-9 / MAX_PHASE_STEP);
                let sub = per_ns.ceil().max(1.0) as u32;
                let coarse_dt = if fastest > 0.0 {
                    COARSE_DT.min(2.0 / fastest)
                } else {
                    COARSE_DT
                };
                Propagator {
                    stepper: Rk4Stepper::new(&h, &rates),
                    sub,
                    coarse_dt,
                }
            })
    }

    fn laser_on_at(template: &RepTemplate, t: u64) -> bool {
        template
            .laser
            .iter()
            .any(|s| s.t_start_ns <= t && t < s.t_end_ns)
    }

    /// Advances `rho` over one repetition and returns its event profile.
    fn rep(
        &mut self,
        rho: &mut DensityMatrix<f64>,
        template: &RepTemplate,
    ) -> Result<RepProfile, PulseError> {
        let rep = self.seq.rep_period_ns;
        let mut cuts = vec![0, self.laser_end, self.span, self.gate.0, self.gate.1, rep];
        for s in template.laser.iter().chain(&template.mw) {
            cuts.push(s.t_start_ns);
            cuts.push(s.t_end_ns);
        }
        cuts.retain(|&c| c <= rep);
        cuts.sort_unstable();
        cuts.dedup();

        let ionize = self.phys.optical.ionize;
        let radiative = self.phys.rates.radiative;
        let (span, gate) = (self.span, self.gate);
        let mut cum = vec![0.0; span as usize + 1];
        let mut ion_acc = 0.0;
        let mut gate_acc = 0.0;
        let excited = |p: &[f64; 10]| Level::EXCITED.iter().map(|l| p[l.index()]).sum::<f64>();

        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let laser_on = Self::laser_on_at(template, a);
            let omega = template.mw_at(a);
            let ion_rate = if laser_on { ionize } else { 0.0 };
            let fine = a < span || omega != 0.0;
            let prop = self.propagator(laser_on, omega);
            let stepper = &prop.stepper;
            let drive_free = stepper.generator().is_drive_free();

            if !fine {
                // laser off, no drive, past the tail: nothing to record
                let len = (b - a) as f64 * 1e-9;
                let n = (len / prop.coarse_dt).ceil().max(1.0);
                let dt = len / n;
                let mut p = rho.populations();
                for _ in 0..n as usize {
                    stepper.step_populations(&mut p, dt);
                }
                set_populations(rho, &p);
                stepper.generator().decay_coherences(&mut rho.elements, len);
                rho.normalize();
                continue;
            }

            let dt = 1e-9 / prop.sub as f64;
            let in_gate = |t: u64| t >= gate.0 && t < gate.1;
            if drive_free {
                let mut p = rho.populations();
                for t in a..b {
                    for _ in 0..prop.sub {
                        let before = excited(&p);
                        stepper.step_populations(&mut p, dt);
                        let mean = 0.5 * (before + excited(&p)) * dt;
                        ion_acc += ion_rate * mean;
                        if in_gate(t) {
                            gate_acc += radiative * mean;
                        }
                    }
                    if t < span {
                        cum[t as usize + 1] = ion_acc;
                    }
                }
                set_populations(rho, &p);
                stepper
                    .generator()
                    .decay_coherences(&mut rho.elements, (b - a) as f64 * 1e-9);
                rho.normalize();
            } else {
                for t in a..b {
                    for _ in 0..prop.sub {
                        let before = excited(&rho.populations());
                        stepper.step(rho, dt)?;
                        let mean = 0.5 * (before + excited(&rho.populations())) * dt;
                        ion_acc += ion_rate * mean;
                        if in_gate(t) {
                            gate_acc += radiative * mean;
                        }
                    }
                    if t < span {
                        cum[t as usize + 1] = ion_acc;
                    }
                }
            }
        }
        Ok(RepProfile {
            ionization_cum: cum,
            gate_emission: gate_acc,
        })
    }

    fn half(
        &mut self,
        rho: &mut DensityMatrix<f64>,
        template: &RepTemplate,
        keep: bool,
    ) -> Result<HalfProfile, PulseError> {
        let mut transient = Vec::new();
        for _ in 0..MAX_TRANSIENT_REPS {
            let start = *rho;
            let prof = self.rep(rho, template)?;
            if rho.distance(&start) < PERIODIC_TOL {
                return Ok(HalfProfile {
                    transient,
                    steady: prof,
                    converged: true,
                });
            }
            if keep || transient.is_empty() {
                transient.push(prof);
            } else {
                transient[0] = prof;
            }
        }
        let steady = transient.pop().expect("at least one repetition");
        Ok(HalfProfile {
            transient,
            steady,
            converged: false,
        })
    }
}

fn set_populations(rho: &mut DensityMatrix<f64>, p: &[f64; 10]) {
    for (i, &v) in p.iter().enumerate() {
        rho.elements[(i, i)] = num_complex::Complex::new(v, 0.0);
    }
}

/// Deterministic per-repetition event profiles of both envelope halves in
/// the periodic regime of the envelope.
pub fn simulate_profiles(
    seq: &PulseSequence,
    phys: &PhysicsBundle,
) -> Result<SequenceProfiles, PulseError> {
    seq.validate()?;
    phys.spin.validate()?;
    phys.rates.validate()?;
    let mut sim = RepSimulator::new(seq, phys);
    let mut rho = DensityMatrix::mixed_ground();
    sim.half(&mut rho, &seq.low, false)?;
    let high = sim.half(&mut rho, &seq.high, true)?;
    let low = sim.half(&mut rho, &seq.low, true)?;
    Ok(SequenceProfiles { high, low })
}

/// Electrical and optical traces of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTraces {
    pub current: TraceRecord,
    pub counts: TraceRecord,
}

/// Simulates `n_envelopes` envelopes of `seq` and returns the labelled
/// samples of every enabled readout.
pub fn run_sequence(
    seq: &PulseSequence,
    phys: &PhysicsBundle,
    det: &DetectorBundle,
    n_envelopes: u64,
    seed: u64,
) -> Result<SequenceTraces, PulseError> {
    let mut current = TraceRecord::new(TraceKind::Current, seq.id, seed);
    let mut counts = TraceRecord::new(TraceKind::Counts, seq.id, seed);
    run_sequence_into(seq, phys, det, n_envelopes, seed, &mut current, &mut counts)?;
    Ok(SequenceTraces { current, counts })
}

/// Streaming form of [`run_sequence`].
pub fn run_sequence_into(
    seq: &PulseSequence,
    phys: &PhysicsBundle,
    det: &DetectorBundle,
    n_envelopes: u64,
    seed: u64,
    current: &mut dyn SampleSink,
    counts: &mut dyn SampleSink,
) -> Result<(), PulseError> {
    if n_envelopes == 0 {
        seq.validate()?;
        return Ok(());
    }
    let profiles = simulate_profiles(seq, phys)?;
    acquire(
        seq,
        &profiles,
        phys,
        det,
        n_envelopes,
        seed,
        current,
        counts,
    )
}

/// Turns event profiles into detector samples. Random draws come from
/// independent ChaCha8 streams of `seed` derived from the sequence id: one
/// for the laser power, one for the photocurrent, one for the photon counts.
#[allow(clippy::too_many_arguments)]
pub fn acquire(
    seq: &PulseSequence,
    profiles: &SequenceProfiles,
    phys: &PhysicsBundle,
    det: &DetectorBundle,
    n_envelopes: u64,
    seed: u64,
    current: &mut dyn SampleSink,
    counts: &mut dyn SampleSink,
) -> Result<(), PulseError> {
    det.tia.validate()?;
    det.apd.validate()?;
    det.noise.validate()?;
    let rng = |k: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(3 * seq.id as u64 + k);
        r
    };
    let (mut rng_laser, mut rng_shot, mut rng_count) = (rng(0), rng(1), rng(2));

    let rep = seq.rep_period_ns;
    let n = seq.n_reps_per_half_envelope;
    let half = seq.half_envelope_ns;
    let total = n_envelopes * 2 * half;
    let laser_end = seq.high.laser.iter().map(|s| s.t_end_ns).max().unwrap_or(0);
    let charge_per_event = ELEMENTARY_CHARGE * phys.ensemble.n_defects as f64;
    let bg = phys.background_current_a;
    let laser_rel = det.noise.laser_rel();
    let shot = det.noise.shot();

    let period = seq.daq_period_ns;
    let dt = period as f64 * 1e-9;
    let low = &profiles.low.steady;
    let mean_low = (charge_per_event * low.ionization_total() + bg * laser_end as f64 * 1e-9)
        / (rep as f64 * 1e-9);
    let mut tia = TiaState::settled(&det.tia, dt, mean_low);
    let a = det.tia.decay(dt);
    // white input noise giving the configured rms at the filter output
    let input_scale = ((1.0 + a) / (1.0 - a)).sqrt();
    let gain = det.tia.gain;
    let label = |t: u64| t % (2 * half) < half;

    let overlap = |u: u64, w: u64| w.min(laser_end).saturating_sub(u.min(laser_end)) as f64 * 1e-9;

    let mut next_tick = 0u64;
    if det.electrical {
        // Bring the filter into its periodic state under RF-off repetitions
        // so the first half-envelope carries no start-up ripple. The warm-up
        // spans whole DAQ periods and draws no random numbers.
        let step = period / gcd(rep, period);
        let need =
            (WARMUP_TIME_CONSTANTS * det.tia.time_constant() / (rep as f64 * 1e-9)).ceil() as u64;
        let reps = need.div_ceil(step).max(1) * step;
        let (mut tick, mut acc) = (period, 0.0);
        for g in 0..reps {
            let s = g * rep;
            let charge = |u: u64, w: u64| {
                charge_per_event * (low.ionization_at(w) - low.ionization_at(u))
                    + bg * overlap(u, w)
            };
            let mut u = 0;
            while tick <= reps * rep && tick - s <= rep {
                let w = tick - s;
                acc += charge(u, w);
                u = w;
                tia.update(acc / dt);
                acc = 0.0;
                tick += period;
            }
            acc += charge(u, rep);
        }
        current.push(0.0, tia.voltage / gain, true);
        next_tick = period;
    }

    let mut acc = 0.0;
    for g in 0..n_envelopes * 2 * n {
        let rf_on = (g / n).is_multiple_of(2);
        let prof = profiles.half(rf_on).rep((g % n) as usize);
        let s = g * rep;
        let f = laser_factor(laser_rel, &mut rng_laser);

        if det.optical {
            let mean = det
                .apd
                .apply_dead_time(photon_rate(prof.gate_emission, &phys.ensemble) * f);
            let value = if det.noise.counting() {
                poisson_count(mean, &mut rng_count) as f64
            } else {
                mean
            };
            counts.push((s + seq.apd_rise_delay_ns) as f64 * 1e-9, value, rf_on);
        }

        if det.electrical {
            let charge = |u: u64, w: u64| {
                f * (charge_per_event * (prof.ionization_at(w) - prof.ionization_at(u))
                    + bg * overlap(u, w))
            };
            let mut u = 0;
            while next_tick < total && next_tick - s <= rep {
                let w = next_tick - s;
                acc += charge(u, w);
                u = w;
                let mut i = acc / dt;
                if shot {
                    let sigma = shot_noise_sigma(
                        i + det.tia.dark_current_a,
                        det.tia.bandwidth_hz,
                        det.tia.input_noise_a,
                    );
                    let z: f64 = StandardNormal.sample(&mut rng_shot);
                    i += sigma * input_scale * z;
                }
                let v = tia.update(i);
                current.push(next_tick as f64 * 1e-9, v / gain, label(next_tick));
                acc = 0.0;
                next_tick += period;
            }
            acc += charge(u, rep);
        }
    }
    Ok(())
}
