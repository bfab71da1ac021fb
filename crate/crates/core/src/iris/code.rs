//! 1-D Log-Gabor phase coding of normalized strips and the shift-tolerant
//! normalized Hamming distance between codes.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::iris::{NormalizedIris, STRIP_COLS, STRIP_ROWS};

/// Log-Gabor filter parameters for the angular (240-sample) signal.
#[derive(Debug, Clone, Copy)]
pub struct LogGaborParams {
    /// Center wavelength in angular samples.
    pub wavelength: f64,
    /// Bandwidth parameter sigma/f of the log-Gaussian envelope.
    pub sigma_over_f: f64,
    /// Responses with magnitude below this are masked as unreliable.
    pub magnitude_floor: f64,
}

impl Default for LogGaborParams {
    fn default() -> Self {
        LogGaborParams {
            wavelength: 18.0,
            sigma_over_f: 0.5,
            magnitude_floor: 1e-4,
        }
    }
}

impl LogGaborParams {
    fn validate(&self) -> Result<()> {
        if !(self.wavelength >= 2.0) {
            return Err(Error::invalid(
                "log-Gabor wavelength must be at least 2 samples",
            ));
        }
        if !(self.sigma_over_f > 0.0 && self.sigma_over_f < 1.0) {
            return Err(Error::invalid("sigma/f must be in (0, 1)"));
        }
        if !(self.magnitude_floor >= 0.0) {
            return Err(Error::invalid("magnitude floor must be nonnegative"));
        }
        Ok(())
    }
}

/// Binary iris code: two phase bits per strip sample plus a usability mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrisCode {
    /// 2 bits per sample, row-major over (row, column): real-part sign,
    /// then imaginary-part sign. Length 20*240*2 = 9600.
    pub bits: Vec<bool>,
    /// One flag per sample (length 4800); false marks unusable samples.
    pub mask: Vec<bool>,
}

impl IrisCode {
    pub fn from_parts(bits: Vec<bool>, mask: Vec<bool>) -> Result<IrisCode> {
        if bits.len() != 2 * STRIP_ROWS * STRIP_COLS || mask.len() != STRIP_ROWS * STRIP_COLS {
            return Err(Error::invalid("iris code has wrong bit/mask length"));
        }
        Ok(IrisCode { bits, mask })
    }

    pub fn bit_len(&self) -> usize {
        self.bits.len()
    }

    /// A code with no usable samples cannot be matched.
    pub fn usable(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }
}

/// Encodes a normalized strip: each radial row's angular signal is filtered
/// with a frequency-domain 1-D log-Gabor kernel (positive frequencies only,
/// zero DC gain), and the complex response phase is quantized to quadrant
/// bits (Re >= 0, Im >= 0). Samples with response magnitude below the floor
/// or outside the geometric mask are marked unusable.
pub fn log_gabor_encode(norm: &NormalizedIris, params: &LogGaborParams) -> Result<IrisCode> {
    params.validate()?;
    let n = STRIP_COLS;
    let f0 = 1.0 / params.wavelength;
    let log_sigma = params.sigma_over_f.ln();
    // Gain per nonnegative-frequency bin; DC is zero by construction.
    let gain: Vec<f64> = (0..=n / 2)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                let f = k as f64 / n as f64;
                (-(f / f0).ln().powi(2) / (2.0 * log_sigma * log_sigma)).exp()
            }
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut bits = Vec::with_capacity(2 * STRIP_ROWS * n);
    let mut mask = Vec::with_capacity(STRIP_ROWS * n);
    let mut row = vec![Complex::new(0.0f64, 0.0); n];
    for i in 0..STRIP_ROWS {
        for (j, v) in row.iter_mut().enumerate() {
            *v = Complex::new(norm.strip.get(i, j) as f64, 0.0);
        }
        fft.process(&mut row);
        for (k, v) in row.iter_mut().enumerate() {
            // Keeping only nonnegative frequencies makes the response
            // complex (analytic), carrying phase in both components.
            *v *= if k <= n / 2 { gain[k] } else { 0.0 };
        }
        ifft.process(&mut row);
        for (j, v) in row.iter().enumerate() {
            let c = *v / n as f64;
            bits.push(c.re >= 0.0);
            bits.push(c.im >= 0.0);
            mask.push(norm.valid_mask[i * n + j] && c.norm() >= params.magnitude_floor);
        }
    }
    Ok(IrisCode { bits, mask })
}

/// Normalized Hamming distance, minimized over cyclic column shifts of the
/// second code in `[-max_shift, +max_shift]`. At each shift the distance is
/// the number of disagreeing bits over jointly-usable samples divided by
/// twice the joint sample count. Errors when no shift has any jointly
/// usable sample.
pub fn hamming_distance(a: &IrisCode, b: &IrisCode, max_shift: usize) -> Result<f64> {
    if max_shift >= STRIP_COLS {
        return Err(Error::invalid("shift range exceeds the angular period"));
    }
    let mut best: Option<f64> = None;
    let shift_span = max_shift as isize;
    for s in -shift_span..=shift_span {
        let mut joint = 0u32;
        let mut differing = 0u32;
        for r in 0..STRIP_ROWS {
            let base = r * STRIP_COLS;
            for c in 0..STRIP_COLS {
                let cb = (c as isize + s).rem_euclid(STRIP_COLS as isize) as usize;
                if a.mask[base + c] && b.mask[base + cb] {
                    joint += 1;
                    let (ia, ib) = (2 * (base + c), 2 * (base + cb));
                    differing += u32::from(a.bits[ia] != b.bits[ib])
                        + u32::from(a.bits[ia + 1] != b.bits[ib + 1]);
                }
            }
        }
        if joint > 0 {
            let hd = differing as f64 / (2.0 * joint as f64);
            if best.is_none_or(|b| hd < b) {
                best = Some(hd);
            }
        }
    }
    best.ok_or(Error::Incomparable)
}
