//! Verification experiments: all-pairs matching, equal-error-rate
//! computation, and the two enrollment/query scenarios.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::iris::{
    hamming_distance, log_gabor_encode, preprocess, unwrap, IrisCode, LogGaborParams,
    SegmentationAnnotation,
};

/// Which side of each comparison uses reconstructed imagery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Enrollment from the original images, queries from reconstructions.
    One,
    /// Both enrollment and queries from reconstructions.
    Two,
}

impl Scenario {
    pub fn from_number(n: u8) -> Result<Scenario> {
        match n {
            1 => Ok(Scenario::One),
            2 => Ok(Scenario::Two),
            _ => Err(Error::invalid(format!("scenario must be 1 or 2, got {}", n))),
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
        }
    }
}

/// Equal error rate and the bookkeeping around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationResult {
    /// Fraction in [0, 1]; at most 0.5 when lower scores mean more similar.
    pub eer: f64,
    /// Score threshold at which FAR and FRR cross.
    pub threshold_at_eer: f64,
    pub genuine_count: usize,
    pub impostor_count: usize,
}

/// Computes the equal error rate of a verification experiment. Scores are
/// distances (lower = more similar). FAR(t) is the impostor fraction
/// strictly below `t` and FRR(t) the genuine fraction strictly above it.
/// The EER is read off where FAR - FRR changes sign, linearly interpolated
/// between the two adjacent observed thresholds.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<VerificationResult> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::invalid(
            "EER needs at least one genuine and one impostor score",
        ));
    }
    let mut gen_sorted = genuine.to_vec();
    let mut imp_sorted = impostor.to_vec();
    gen_sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));
    imp_sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));

    let mut thresholds: Vec<f64> = gen_sorted.iter().chain(&imp_sorted).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    let far_at = |t: f64| {
        imp_sorted.partition_point(|&s| s < t) as f64 / imp_sorted.len() as f64
    };
    let frr_at = |t: f64| {
        (gen_sorted.len() - gen_sorted.partition_point(|&s| s <= t)) as f64
            / gen_sorted.len() as f64
    };

    let result = |eer: f64, threshold: f64| VerificationResult {
        eer,
        threshold_at_eer: threshold,
        genuine_count: genuine.len(),
        impostor_count: impostor.len(),
    };

    // FAR - FRR starts <= 0 (no impostor is below the smallest score) and
    // ends >= 0 (no genuine exceeds the largest), so a crossing exists.
    let mut prev: Option<(f64, f64, f64)> = None;
    for &t in &thresholds {
        let (far, frr) = (far_at(t), frr_at(t));
        let diff = far - frr;
        if diff == 0.0 {
            return Ok(result(far, t));
        }
        if diff > 0.0 {
            let (t0, far0, diff0) = prev.expect("sign change before first threshold");
            let alpha = -diff0 / (diff - diff0);
            return Ok(result(far0 + (far - far0) * alpha, t0 + (t - t0) * alpha));
        }
        prev = Some((t, far, diff));
    }
    unreachable!("FAR - FRR never reached zero");
}

/// One annotated image participating in a verification run.
#[derive(Debug, Clone)]
pub struct VerificationSample {
    pub image_id: String,
    pub eye_id: String,
    pub image: Image,
    pub annotation: SegmentationAnnotation,
}

/// Settings for a verification run.
#[derive(Debug, Clone, Copy)]
pub struct VerificationConfig {
    pub scenario: Scenario,
    pub target_sclera_radius: f64,
    pub log_gabor: LogGaborParams,
    /// Cyclic column shift tolerance of the Hamming matcher.
    pub max_shift: usize,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            scenario: Scenario::One,
            target_sclera_radius: crate::iris::DEFAULT_TARGET_SCLERA_RADIUS,
            log_gabor: LogGaborParams::default(),
            max_shift: 8,
        }
    }
}

/// One scored (enrolled, query) comparison.
#[derive(Debug, Clone)]
pub struct PairScore {
    pub enrolled_id: String,
    pub query_id: String,
    /// True when both sides come from the same eye.
    pub genuine: bool,
    pub score: f64,
}

/// Preprocesses, reconstructs, encodes, and scores every (enrolled, query)
/// pair. `reconstruct` maps a preprocessed crop to its degraded-and-
/// super-resolved counterpart and must preserve dimensions. Samples whose
/// crop leaves the frame, and pairs without jointly usable code samples,
/// are dropped with a log message.
pub fn score_pairs<F>(
    samples: &[VerificationSample],
    config: &VerificationConfig,
    reconstruct: F,
) -> Result<Vec<PairScore>>
where
    F: Fn(&Image) -> Result<Image>,
{
    struct Encoded {
        image_id: String,
        eye_id: String,
        enrolled: IrisCode,
        query: IrisCode,
    }

    let mut encoded = Vec::with_capacity(samples.len());
    for sample in samples {
        let Some(pre) = preprocess(
            &sample.image,
            &sample.annotation,
            config.target_sclera_radius,
        )?
        else {
            log::warn!("discarding {}: crop leaves the frame", sample.image_id);
            continue;
        };
        let sr = reconstruct(&pre.image)?;
        if sr.width() != pre.image.width() || sr.height() != pre.image.height() {
            return Err(Error::invalid(
                "reconstruction changed the image dimensions",
            ));
        }
        let encode = |img: &Image| -> Result<IrisCode> {
            log_gabor_encode(&unwrap(img, &pre.annotation)?, &config.log_gabor)
        };
        let query = encode(&sr)?;
        let enrolled = match config.scenario {
            Scenario::One => encode(&pre.image)?,
            Scenario::Two => query.clone(),
        };
        if !enrolled.usable() || !query.usable() {
            log::warn!("discarding {}: code has no usable samples", sample.image_id);
            continue;
        }
        encoded.push(Encoded {
            image_id: sample.image_id.clone(),
            eye_id: sample.eye_id.clone(),
            enrolled: enrolled.clone(),
            query,
        });
    }

    let mut pairs = Vec::with_capacity(encoded.len() * encoded.len());
    for e in &encoded {
        for q in &encoded {
            match hamming_distance(&e.enrolled, &q.query, config.max_shift) {
                Ok(score) => pairs.push(PairScore {
                    enrolled_id: e.image_id.clone(),
                    query_id: q.image_id.clone(),
                    genuine: e.eye_id == q.eye_id,
                    score,
                }),
                Err(Error::Incomparable) => {
                    log::warn!("skipping pair {} / {}: incomparable", e.image_id, q.image_id);
                }
                Err(other) => return Err(other),
            }
        }
    }
    Ok(pairs)
}

/// Runs a full verification experiment and reduces it to an EER.
pub fn run_verification<F>(
    samples: &[VerificationSample],
    config: &VerificationConfig,
    reconstruct: F,
) -> Result<VerificationResult>
where
    F: Fn(&Image) -> Result<Image>,
{
    let pairs = score_pairs(samples, config, reconstruct)?;
    let genuine: Vec<f64> = pairs.iter().filter(|p| p.genuine).map(|p| p.score).collect();
    let impostor: Vec<f64> = pairs
        .iter()
        .filter(|p| !p.genuine)
        .map(|p| p.score)
        .collect();
    compute_eer(&genuine, &impostor)
}
