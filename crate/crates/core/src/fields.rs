//! Control fields on a uniform time mesh and their transformations.
//!
//! A field over `[0, T]` carries `n_steps + 1` samples. Quadratures and the
//! discrete Fourier transform use the first `n_steps` samples, i.e. the
//! field is treated as one period of a `T`-periodic signal. This makes the
//! frequency spacing exactly `2 pi / T` and Parseval's identity exact.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMesh {
    t_final: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeMesh {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(invalid("T", format!("must be positive, got {t_final}")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1"));
        }
        Ok(Self {
            t_final,
            n_steps,
            dt: t_final / n_steps as f64,
        })
    }

    /// Mesh with the step closest to `dt` that divides `t_final` evenly.
    pub fn with_step(t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::StepSize(dt));
        }
        let n = (t_final / dt).round().max(1.0) as usize;
        Self::new(t_final, n)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|k| self.time(k)).collect()
    }

    fn same_step(&self, other: &TimeMesh) -> bool {
        (self.dt - other.dt).abs() <= 1e-12 * self.dt.abs().max(other.dt.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    mesh: TimeMesh,
    samples: Vec<f64>,
}

impl ControlField {
    pub fn new(mesh: TimeMesh, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != mesh.n_samples() {
            return Err(Error::MeshMismatch {
                expected: mesh.n_samples(),
                found: samples.len(),
            });
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(invalid("samples", format!("non-finite field value {bad}")));
        }
        Ok(Self { mesh, samples })
    }

    pub fn zeros(mesh: TimeMesh) -> Self {
        Self {
            mesh,
            samples: vec![0.0; mesh.n_samples()],
        }
    }

    pub fn from_fn(mesh: TimeMesh, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.times().into_iter().map(f).collect())
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn duration(&self) -> f64 {
        self.mesh.t_final()
    }

    pub fn fluence(&self) -> f64 {
        fluence(self)
    }

    /// Rescales the samples so that the fluence equals `target`.
    pub fn with_fluence(mut self, target: f64) -> Result<Self> {
        let current = self.fluence();
        if !(current > 0.0) {
            return Err(invalid("field", "cannot rescale a field with zero fluence"));
        }
        let s = (target / current).sqrt();
        self.samples.iter_mut().for_each(|x| *x *= s);
        Ok(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `sum_{k < n_steps} eps_k^2 dt`
pub fn fluence(field: &ControlField) -> f64 {
    sample_fluence(&field.samples, field.mesh.dt())
}

pub(crate) fn sample_fluence(samples: &[f64], dt: f64) -> f64 {
    let n = samples.len() - 1;
    samples[..n].iter().map(|x| x * x).sum::<f64>() * dt
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub a: f64,
    pub b: f64,
}

impl EnvelopeParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("envelope.a", format!("must be positive, got {a}")));
        }
        if !(b > 2.0 && b.is_finite()) {
            return Err(invalid("envelope.b", format!("must exceed 2, got {b}")));
        }
        Ok(Self { a, b })
    }
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self { a: 100.0, b: 20.0 }
    }
}

/// Error-function switch: rises near `T/b`, falls near `T - T/b`.
pub fn envelope_value(t: f64, t_final: f64, params: &EnvelopeParams) -> Result<f64> {
    if !(0.0..=t_final).contains(&t) {
        return Err(Error::OutOfRange { t, t_final });
    }
    Ok(envelope_unchecked(t, t_final, params))
}

fn envelope_unchecked(t: f64, t_final: f64, params: &EnvelopeParams) -> f64 {
    let k = params.a / t_final;
    let edge = t_final / params.b;
    0.5 * (libm::erf(k * (t - edge)) + libm::erf(-k * (t - t_final + edge)))
}

pub fn envelope_samples(mesh: &TimeMesh, params: &EnvelopeParams) -> Vec<f64> {
    mesh.times()
        .into_iter()
        .map(|t| envelope_unchecked(t, mesh.t_final(), params))
        .collect()
}

/// Discrete Fourier coefficients in FFT order.
#[derive(Debug, Clone)]
pub struct FieldSpectrum {
    pub omega: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    dt: f64,
}

impl FieldSpectrum {
    pub fn resolution(&self) -> f64 {
        if self.omega.len() > 1 {
            self.omega[1] - self.omega[0]
        } else {
            0.0
        }
    }

    /// Parseval counterpart of [`fluence`]: `dt / N * sum |E_j|^2`.
    pub fn fluence(&self) -> f64 {
        let n = self.amplitude.len() as f64;
        self.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dt / n
    }

    /// Angular frequency of the largest non-negative-frequency bin.
    pub fn dominant_frequency(&self) -> f64 {
        let (j, _) = self
            .omega
            .iter()
            .zip(&self.amplitude)
            .enumerate()
            .filter(|(_, (w, _))| **w >= 0.0)
            .fold((0, -1.0), |best, (j, (_, a))| {
                if a.norm() > best.1 {
                    (j, a.norm())
                } else {
                    best
                }
            });
        self.omega[j]
    }

    /// Bins sorted by increasing angular frequency.
    pub fn sorted(&self) -> Vec<(f64, Complex64)> {
        let mut rows: Vec<_> = self.omega.iter().cloned().zip(self.amplitude.iter().cloned()).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows
    }

    /// Zeroes every bin with `|omega| > omega_th`.
    pub fn low_pass(&mut self, omega_th: f64) {
        for (w, a) in self.omega.iter().zip(self.amplitude.iter_mut()) {
            if w.abs() > omega_th {
                *a = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Inverse transform back onto `mesh`; the closing sample repeats the first.
    pub fn to_field(&self, mesh: TimeMesh) -> Result<ControlField> {
        if self.amplitude.len() != mesh.n_steps() {
            return Err(Error::MeshMismatch {
                expected: mesh.n_steps(),
                found: self.amplitude.len(),
            });
        }
        let mut buf = self.amplitude.clone();
        FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        let mut samples: Vec<f64> = buf.iter().map(|c| c.re * scale).collect();
        samples.push(samples[0]);
        ControlField::new(mesh, samples)
    }
}

pub(crate) fn bin_frequencies(n: usize, t_final: f64) -> Vec<f64> {
    let step = 2.0 * PI / t_final;
    (0..n)
        .map(|j| {
            if j <= n / 2 {
                j as f64 * step
            } else {
                (j as f64 - n as f64) * step
            }
        })
        .collect()
}

pub fn spectrum(field: &ControlField) -> FieldSpectrum {
    let n = field.mesh.n_steps();
    let mut buf: Vec<Complex64> = field.samples[..n].iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    FieldSpectrum {
        omega: bin_frequencies(n, field.mesh.t_final()),
        amplitude: buf,
        dt: field.mesh.dt(),
    }
}

/// Brick-wall low-pass: zeroes every bin with `|omega| > omega_th`.
pub fn apply_frequency_filter(field: &ControlField, omega_th: f64) -> Result<ControlField> {
    if !(omega_th > 0.0) {
        return Err(invalid("omega_th", format!("must be positive, got {omega_th}")));
    }
    if omega_th.is_infinite() {
        return Ok(field.clone());
    }
    let mut spec = spectrum(field);
    spec.low_pass(omega_th);
    spec.to_field(field.mesh)
}

/// `eps'(t_k) = eps(T - t_k)`
pub fn time_invert(field: &ControlField) -> ControlField {
    let mut samples = field.samples.clone();
    samples.reverse();
    ControlField {
        mesh: field.mesh,
        samples,
    }
}

/// Joins fields end to end. The first sample of every later field is
/// dropped since it coincides in time with the last sample of the previous one.
pub fn concatenate(fields: &[ControlField]) -> Result<ControlField> {
    let first = fields.first().ok_or_else(|| invalid("fields", "nothing to concatenate"))?;
    let mut samples = first.samples.clone();
    let mut n_steps = first.mesh.n_steps();
    let mut t_final = first.mesh.t_final();
    for f in &fields[1..] {
        if !first.mesh.same_step(&f.mesh) {
            return Err(invalid(
                "fields",
                format!("time steps differ: {} vs {}", first.mesh.dt(), f.mesh.dt()),
            ));
        }
        samples.extend_from_slice(&f.samples[1..]);
        n_steps += f.mesh.n_steps();
        t_final += f.mesh.t_final();
    }
    ControlField::new(TimeMesh::new(t_final, n_steps)?, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mesh() -> TimeMesh {
        TimeMesh::new(100.0, 10_000).unwrap()
    }

    /// `T = 20 pi`, so `omega = 0.1 j` falls exactly on bin `j`.
    fn bin_aligned_mesh() -> TimeMesh {
        TimeMesh::new(20.0 * PI, 4096).unwrap()
    }

    /// Direct O(N^2) DFT.
    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|j| {
                x.iter()
                    .enumerate()
                    .map(|(k, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn mesh_step_times_count_is_duration() {
        let m = TimeMesh::with_step(100.0, 0.01).unwrap();
        assert_eq!(m.n_steps(), 10_000);
        assert!((m.dt() * m.n_steps() as f64 / 100.0 - 1.0).abs() < 1e-12);
        assert!(TimeMesh::with_step(100.0, 0.0).is_err());
        assert!(TimeMesh::new(-1.0, 10).is_err());
    }

    #[test]
    fn wrong_sample_count_is_rejected() {
        assert!(matches!(
            ControlField::new(mesh(), vec![0.0; 10]),
            Err(Error::MeshMismatch { .. })
        ));
        assert!(ControlField::new(TimeMesh::new(1.0, 2).unwrap(), vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn fluence_closed_forms() {
        assert_eq!(fluence(&ControlField::zeros(mesh())), 0.0);
        let c = 0.37;
        let f = ControlField::from_fn(mesh(), |_| c).unwrap();
        assert!((fluence(&f) - c * c * 100.0).abs() < 1e-10);
    }

    #[test]
    fn envelope_switches_on_and_off() {
        let p = EnvelopeParams::default();
        assert!(envelope_value(0.0, 100.0, &p).unwrap().abs() < 1e-10);
        assert!((envelope_value(50.0, 100.0, &p).unwrap() - 1.0).abs() < 1e-10);
        assert!(envelope_value(100.0, 100.0, &p).unwrap().abs() < 1e-10);
        assert!(envelope_value(-0.1, 100.0, &p).is_err());
        assert!(envelope_value(100.1, 100.0, &p).is_err());
        for v in envelope_samples(&mesh(), &p) {
            assert!(v > -f64::EPSILON && v < 1.0 + f64::EPSILON);
        }
    }

    #[test]
    fn envelope_params_validated() {
        assert!(EnvelopeParams::new(0.0, 20.0).is_err());
        assert!(EnvelopeParams::new(100.0, 2.0).is_err());
        assert!(EnvelopeParams::new(100.0, 20.0).is_ok());
    }

    #[test]
    fn spectrum_matches_naive_dft() {
        let m = TimeMesh::new(7.0, 64).unwrap();
        let f = ControlField::from_fn(m, |t| (1.3 * t).sin() + 0.2 * (t * t).cos()).unwrap();
        let fast = spectrum(&f);
        let slow = naive_dft(&f.samples()[..64]);
        for (a, b) in fast.amplitude.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-11);
        }
        assert!((fast.resolution() - 2.0 * PI / 7.0).abs() < 1e-12);
    }

    #[test]
    fn single_tone_peaks_at_its_frequency() {
        let f = ControlField::from_fn(mesh(), |t| (0.5 * t).sin()).unwrap();
        let spec = spectrum(&f);
        let step = 2.0 * PI / 100.0;
        assert!((spec.dominant_frequency() - 0.5).abs() <= 0.5 * step);
    }

    #[test]
    fn resolution_is_two_pi_over_duration() {
        let spec = spectrum(&ControlField::zeros(mesh()));
        assert!((spec.resolution() - 2.0 * PI / 100.0).abs() < 1e-12);
    }

    #[test]
    fn filter_keeps_low_tone() {
        let m = bin_aligned_mesh();
        let f = ControlField::from_fn(m, |t| (0.3 * t).sin()).unwrap();
        let g = apply_frequency_filter(&f, 0.817).unwrap();
        for (a, b) in f.samples().iter().zip(g.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_removes_high_tone() {
        let m = bin_aligned_mesh();
        let f = ControlField::from_fn(m, |t| (2.0 * t).sin()).unwrap();
        let g = apply_frequency_filter(&f, 0.817).unwrap();
        assert!(g.max_abs() < 1e-9);
    }

    #[test]
    fn filter_rejects_nonpositive_threshold() {
        let f = ControlField::zeros(mesh());
        assert!(apply_frequency_filter(&f, 0.0).is_err());
        assert!(apply_frequency_filter(&f, -1.0).is_err());
        assert_eq!(apply_frequency_filter(&f, f64::INFINITY).unwrap(), f);
    }

    #[test]
    fn inverse_spectrum_round_trip() {
        let m = TimeMesh::new(100.0, 1000).unwrap();
        let p = EnvelopeParams::default();
        let env = envelope_samples(&m, &p);
        let f = ControlField::new(
            m,
            m.times().iter().zip(&env).map(|(t, e)| e * (0.9 * t).sin() * (0.05 * t).cos()).collect(),
        )
        .unwrap();
        let back = spectrum(&f).to_field(m).unwrap();
        for (a, b) in f.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inversion_basics() {
        let m = TimeMesh::new(2.0, 2).unwrap();
        let f = ControlField::new(m, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(time_invert(&f).samples(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn concatenation_lengths_and_fluence() {
        let p = EnvelopeParams::default();
        let env = envelope_samples(&mesh(), &p);
        let a = ControlField::new(mesh(), mesh().times().iter().zip(&env).map(|(t, e)| e * (0.5 * t).sin()).collect())
            .unwrap();
        let b = time_invert(&a);
        let ab = concatenate(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(ab.samples().len(), 2 * a.samples().len() - 1);
        assert!((ab.duration() - 200.0).abs() < 1e-12);
        assert!((ab.fluence() - (a.fluence() + b.fluence())).abs() < 1e-10);
        assert_eq!(ab.samples()[..a.samples().len()], a.samples()[..]);
    }

    #[test]
    fn concatenation_rejects_mismatched_steps() {
        let a = ControlField::zeros(TimeMesh::new(1.0, 10).unwrap());
        let b = ControlField::zeros(TimeMesh::new(1.0, 20).unwrap());
        assert!(concatenate(&[a, b]).is_err());
        assert!(concatenate(&[]).is_err());
    }

    fn random_field() -> impl Strategy<Value = ControlField> {
        prop::collection::vec(-1.0f64..1.0, 257).prop_map(|s| ControlField::new(TimeMesh::new(25.6, 256).unwrap(), s).unwrap())
    }

    fn enveloped_field() -> impl Strategy<Value = ControlField> {
        prop::collection::vec(-1.0f64..1.0, 257).prop_map(|s| {
            let m = TimeMesh::new(25.6, 256).unwrap();
            let env = envelope_samples(&m, &EnvelopeParams::default());
            ControlField::new(m, s.iter().zip(&env).map(|(x, e)| x * e).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn parseval(f in random_field()) {
            let time = fluence(&f);
            let freq = spectrum(&f).fluence();
            prop_assert!((time - freq).abs() <= 1e-8 * time.max(1e-300));
        }

        #[test]
        fn filter_is_idempotent_projection(f in random_field(), w in 0.3f64..8.0) {
            let once = apply_frequency_filter(&f, w).unwrap();
            let twice = apply_frequency_filter(&once, w).unwrap();
            for (a, b) in once.samples().iter().zip(twice.samples()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!(fluence(&once) <= fluence(&f) * (1.0 + 1e-12));
            // bins above the cutoff are zero after one pass
            let spec = spectrum(&once);
            for (om, a) in spec.omega.iter().zip(&spec.amplitude) {
                if om.abs() > w {
                    prop_assert!(a.norm() < 1e-10);
                }
            }
        }

        #[test]
        fn inversion_is_involution_preserving_fluence(f in random_field()) {
            let back = time_invert(&time_invert(&f));
            prop_assert_eq!(&back, &f);
            let inv = time_invert(&f);
            // only the sample order changes
            let mut a: Vec<f64> = f.samples()[..].to_vec();
            let mut b: Vec<f64> = inv.samples()[..].to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn inversion_preserves_fluence_of_closed_fields(s in prop::collection::vec(-1.0f64..1.0, 256)) {
            let mut s = s;
            s.push(s[0]);
            let f = ControlField::new(TimeMesh::new(25.6, 256).unwrap(), s).unwrap();
            let a = fluence(&f);
            prop_assert!((fluence(&time_invert(&f)) - a).abs() <= 1e-14 * a);
        }

        #[test]
        fn inversion_commutes_with_filter(f in enveloped_field(), w in 0.3f64..8.0) {
            let lhs = time_invert(&apply_frequency_filter(&f, w).unwrap());
            let rhs = apply_frequency_filter(&time_invert(&f), w).unwrap();
            for (a, b) in lhs.samples().iter().zip(rhs.samples()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
