//! File formats: `x,y,w` CSV point clouds and JSON generator manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! save/load is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::generators::GeneratorSpec;
use crate::geometry::Point2;
use crate::measures::DiscreteMeasure;

/// Serialize a measure as CSV with header `x,y,w`.
pub fn measure_to_csv(measure: &DiscreteMeasure) -> String {
    let mut out = String::with_capacity(measure.len() * 24 + 8);
    out.push_str("x,y,w\n");
    for (p, w) in measure.points().iter().zip(measure.weights()) {
        out.push_str(&format!("{},{},{}\n", p.x, p.y, w));
    }
    out
}

/// Parse a `x,y,w` CSV point cloud.
pub fn measure_from_csv(text: &str) -> Result<DiscreteMeasure> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::Io("empty point-cloud file".into()))?;
    if header.trim() != "x,y,w" {
        return Err(CoreError::Io(format!(
            "expected header 'x,y,w', found '{header}'"
        )));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next_f64 = |name: &str| -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| {
                    CoreError::Io(format!("line {}: missing {name}", lineno + 2))
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| CoreError::Io(format!("line {}: {e}", lineno + 2)))
        };
        let x = next_f64("x")?;
        let y = next_f64("y")?;
        let w = next_f64("w")?;
        if fields.next().is_some() {
            return Err(CoreError::Io(format!(
                "line {}: expected exactly three columns",
                lineno + 2
            )));
        }
        points.push(Point2::new(x, y));
        weights.push(w);
    }
    DiscreteMeasure::build(points, weights)
}

pub fn save_measure(measure: &DiscreteMeasure, path: &Path) -> Result<()> {
    let mut file =
        fs::File::create(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?;
    file.write_all(measure_to_csv(measure).as_bytes())
        .map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    let text =
        fs::read_to_string(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?;
    measure_from_csv(&text)
}

pub fn load_generator_spec(path: &Path) -> Result<GeneratorSpec> {
    let text =
        fs::read_to_string(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?;
    let spec: GeneratorSpec = serde_json::from_str(&text)
        .map_err(|e| CoreError::InvalidSpec(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

pub fn save_generator_spec(spec: &GeneratorSpec, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(spec)
        .map_err(|e| CoreError::Io(format!("serialize spec: {e}")))?;
    fs::write(path, text).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))
}
