use crate::metrics::Detection;

/// ROIs beyond this count all look alike to the controller.
pub const ROI_COUNT_CAP: usize = 50;

/// Summary of the trusted ROIs in a frame, every component in `[0, 1]`:
/// height and width of the smallest and of the largest ROI (by area),
/// normalized by frame height and width, and the ROI count over
/// [`ROI_COUNT_CAP`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; 5]);

impl FeatureVector {
    pub const LEN: usize = 5;
    pub const NAMES: [&'static str; 5] =
        ["min_roi_height", "min_roi_width", "max_roi_height", "max_roi_width", "roi_count"];

    pub fn min_roi_height(&self) -> f64 {
        self.0[0]
    }

    pub fn min_roi_width(&self) -> f64 {
        self.0[1]
    }

    pub fn max_roi_height(&self) -> f64 {
        self.0[2]
    }

    pub fn max_roi_width(&self) -> f64 {
        self.0[3]
    }

    pub fn roi_count(&self) -> f64 {
        self.0[4]
    }
}

/// Features of the detections scoring at least `threshold`. `None` when the
/// gate lets nothing through.
pub fn extract_features(
    dets: &[Detection],
    frame_width: u32,
    frame_height: u32,
    threshold: f64,
) -> Option<FeatureVector> {
    let trusted: Vec<&Detection> = dets.iter().filter(|d| d.score >= threshold).collect();
    // first wins on equal areas
    let smallest = trusted.iter().copied().reduce(|a, b| if b.bbox.area() < a.bbox.area() { b } else { a })?;
    let largest = trusted.iter().copied().reduce(|a, b| if b.bbox.area() > a.bbox.area() { b } else { a })?;
    let (w, h) = (f64::from(frame_width), f64::from(frame_height));
    let norm = |v: f64, d: f64| (v / d).clamp(0.0, 1.0);
    Some(FeatureVector([
        norm(smallest.bbox.height(), h),
        norm(smallest.bbox.width(), w),
        norm(largest.bbox.height(), h),
        norm(largest.bbox.width(), w),
        trusted.len().min(ROI_COUNT_CAP) as f64 / ROI_COUNT_CAP as f64,
    ]))
}
