//! CSV/JSON serialization of matrices, image sets and experiment outputs.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::connection_graph::{OperatorKind, OperatorMatrix};
use crate::error::{CglError, Result};
use crate::evaluation::RankCdf;
use crate::rid::CircularImage;

/// Dense row-major matrix CSV with the header
/// `# cgl-kit matrix n=<n> k=<k> kind=<kind>`.
pub fn write_matrix_csv(path: &Path, m: &OperatorMatrix) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# cgl-kit matrix n={} k={} kind={}", m.n, m.k, m.kind).unwrap();
    let dim = m.entries.nrows();
    for i in 0..dim {
        let row: Vec<String> = (0..dim).map(|j| format!("{:.17e}", m.entries[(i, j)])).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<OperatorMatrix> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| CglError::Parse("empty matrix file".into()))??;
    let (n, k, kind) = parse_matrix_header(&header)?;
    let dim = n * k;
    let mut entries = DMatrix::<f64>::zeros(dim, dim);
    let mut row = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= dim {
            return Err(CglError::Parse("too many matrix rows".into()));
        }
        let values: Vec<&str> = line.split(',').collect();
        if values.len() != dim {
            return Err(CglError::Parse(format!(
                "row {row} has {} entries, expected {dim}",
                values.len()
            )));
        }
        for (j, v) in values.iter().enumerate() {
            entries[(row, j)] = v
                .trim()
                .parse::<f64>()
                .map_err(|e| CglError::Parse(format!("row {row} col {j}: {e}")))?;
        }
        row += 1;
    }
    if row != dim {
        return Err(CglError::Parse(format!("expected {dim} rows, got {row}")));
    }
    Ok(OperatorMatrix {
        n,
        k,
        kind,
        entries,
    })
}

fn parse_matrix_header(header: &str) -> Result<(usize, usize, OperatorKind)> {
    let rest = header
        .strip_prefix("# cgl-kit matrix ")
        .ok_or_else(|| CglError::Parse("missing matrix header".into()))?;
    let mut n = None;
    let mut k = None;
    let mut kind = None;
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| CglError::Parse(format!("bad header field '{field}'")))?;
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|e| CglError::Parse(e.to_string()))?),
            "k" => k = Some(value.parse::<usize>().map_err(|e| CglError::Parse(e.to_string()))?),
            "kind" => {
                kind = Some(match value {
                    "L" => OperatorKind::L,
                    "L0" => OperatorKind::L0,
                    "Lsym" => OperatorKind::Lsym,
                    other => return Err(CglError::Parse(format!("unknown kind '{other}'"))),
                })
            }
            other => return Err(CglError::Parse(format!("unknown header key '{other}'"))),
        }
    }
    match (n, k, kind) {
        (Some(n), Some(k), Some(kind)) => Ok((n, k, kind)),
        _ => Err(CglError::Parse("incomplete matrix header".into())),
    }
}

/// Image-set CSV: one row per image (p sample columns); labeled sets carry
/// two trailing columns `class_id` and `true_shift`. The header records the
/// layout: `# cgl-kit images n=<n> p=<p> labeled=<0|1>`.
pub fn write_images_csv(
    path: &Path,
    images: &[CircularImage],
    labels: Option<(&[usize], &[usize])>,
) -> Result<()> {
    let mut out = String::new();
    let p = images.first().map_or(0, |im| im.p());
    writeln!(
        out,
        "# cgl-kit images n={} p={} labeled={}",
        images.len(),
        p,
        labels.is_some() as u8
    )
    .unwrap();
    for (i, im) in images.iter().enumerate() {
        let mut row: Vec<String> = im.samples().iter().map(|v| format!("{v:.17e}")).collect();
        if let Some((class_id, true_shift)) = labels {
            row.push(class_id[i].to_string());
            row.push(true_shift[i].to_string());
        }
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub struct ImageCsv {
    pub images: Vec<CircularImage>,
    pub class_id: Option<Vec<usize>>,
    pub true_shift: Option<Vec<usize>>,
}

/// Read an image-set CSV. A `# cgl-kit images ...` header is honored when
/// present; headerless files are treated as unlabeled rows of samples.
pub fn read_images_csv(path: &Path) -> Result<ImageCsv> {
    let content = std::fs::read_to_string(path)?;
    let mut labeled = None;
    let mut images = Vec::new();
    let mut class_id = Vec::new();
    let mut true_shift = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(rest) = line.strip_prefix("# cgl-kit images ") {
                for field in rest.split_whitespace() {
                    if let Some(v) = field.strip_prefix("labeled=") {
                        labeled = Some(v == "1" || v == "true");
                    }
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let labeled = labeled.unwrap_or(false);
        let p = if labeled {
            fields.len().checked_sub(2).ok_or_else(|| {
                CglError::Parse(format!("line {}: labeled row too short", idx + 1))
            })?
        } else {
            fields.len()
        };
        let samples: Vec<f64> = fields[..p]
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CglError::Parse(format!("line {}: {e}", idx + 1)))?;
        images.push(CircularImage::new(samples)?);
        if labeled {
            class_id.push(
                fields[p]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| CglError::Parse(format!("line {}: {e}", idx + 1)))?,
            );
            true_shift.push(
                fields[p + 1]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| CglError::Parse(format!("line {}: {e}", idx + 1)))?,
            );
        }
    }
    if images.is_empty() {
        return Err(CglError::Parse("no image rows found".into()));
    }
    let labeled = !class_id.is_empty();
    Ok(ImageCsv {
        images,
        class_id: labeled.then_some(class_id),
        true_shift: labeled.then_some(true_shift),
    })
}

/// Embedding CSV: `index,coord_1..coord_m`.
pub fn write_embedding_csv(path: &Path, coords: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = std::iter::once("index".to_string())
        .chain((1..=coords.ncols()).map(|l| format!("coord_{l}")))
        .collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    for i in 0..coords.nrows() {
        let mut row = vec![i.to_string()];
        row.extend((0..coords.ncols()).map(|c| format!("{:.17e}", coords[(i, c)])));
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Alignment CSV: `index,class_id,z_radians`.
pub fn write_alignment_csv(path: &Path, class_id: &[usize], z: &[f64]) -> Result<()> {
    let mut out = String::from("index,class_id,z_radians\n");
    for (i, (&c, &zi)) in class_id.iter().zip(z).enumerate() {
        writeln!(out, "{i},{c},{zi:.17e}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Rank-CDF CSV: `rank,cdf` for every rank up to the maximum.
pub fn write_rankcdf_csv(path: &Path, cdf: &RankCdf) -> Result<()> {
    let mut out = String::from("rank,cdf\n");
    for rank in 1..=cdf.max_rank {
        writeln!(out, "{rank},{}", cdf.cdf(rank)).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Pairwise-RID table CSV: `i,j,distance_sq,shift`.
pub fn write_rid_csv(path: &Path, table: &crate::rid::RidTable) -> Result<()> {
    let mut out = String::from("i,j,distance_sq,shift\n");
    for i in 0..table.n {
        for j in 0..table.n {
            if i != j {
                writeln!(
                    out,
                    "{i},{j},{:.17e},{}",
                    table.distance_sq[(i, j)],
                    table.shift_at(i, j)
                )
                .unwrap();
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CglError::Parse(format!("json serialization: {e}")))?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}
