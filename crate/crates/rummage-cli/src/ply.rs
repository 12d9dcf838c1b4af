//! ASCII PLY export of observed clouds with a per-vertex affordance score.

use anyhow::{bail, Context, Result};

use rummage_core::net::AffordanceMap;
use rummage_core::obs::PointCloudObs;
use rummage_core::Vec3;

/// Writes `x y z affordance` vertices. Scores round-trip exactly at f32
/// (shortest-representation formatting).
pub fn export_affordance(obs: &PointCloudObs, map: &AffordanceMap, config_hash: u64) -> Result<String> {
    if obs.len() != map.len() {
        bail!("cloud has {} points but map has {} scores", obs.len(), map.len());
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("comment config_hash={config_hash:016x}\n"));
    out.push_str(&format!("comment scene_ref={:016x}\n", obs.scene_ref));
    out.push_str(&format!("element vertex {}\n", obs.len()));
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    out.push_str("property float affordance\nend_header\n");
    for (p, &score) in obs.points.iter().zip(&map.scores) {
        out.push_str(&format!("{} {} {} {}\n", p.x as f32, p.y as f32, p.z as f32, score));
    }
    Ok(out)
}

/// Reads back a PLY written by [`export_affordance`].
pub fn import_affordance(text: &str) -> Result<(Vec<Vec3>, Vec<f32>)> {
    let mut lines = text.lines();
    let mut n: Option<usize> = None;
    for line in lines.by_ref() {
        if let Some(rest) = line.strip_prefix("element vertex ") {
            n = Some(rest.trim().parse().context("vertex count")?);
        }
        if line.trim() == "end_header" {
            break;
        }
    }
    let n = n.context("missing element vertex line")?;
    let mut points = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().context("truncated vertex list")?;
        let mut it = line.split_whitespace();
        let mut next = || -> Result<f32> {
            it.next().context("missing field")?.parse::<f32>().context("bad float")
        };
        let (x, y, z, a) = (next()?, next()?, next()?, next()?);
        points.push(Vec3::new(x as f64, y as f64, z as f64));
        scores.push(a);
    }
    Ok((points, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact_at_f32() {
        let obs = PointCloudObs {
            points: vec![
                Vec3::new(0.125, -0.25, 0.0625),
                Vec3::new(1.0 / 3.0, 0.1, 0.7),
            ],
            provenance: vec![(0, 0), (0, 1)],
            scene_ref: 0xabcd,
        };
        let map = AffordanceMap::new(vec![0.12345678, 0.9999999]).unwrap();
        let text = export_affordance(&obs, &map, 7).unwrap();
        let (points, scores) = import_affordance(&text).unwrap();
        assert_eq!(points.len(), 2);
        for (a, b) in scores.iter().zip(&map.scores) {
            assert_eq!(a, b, "f32 scores must round-trip exactly");
        }
        for (p, q) in points.iter().zip(&obs.points) {
            assert_eq!(p.x as f32, q.x as f32);
        }
    }

    #[test]
    fn mismatched_lengths_error() {
        let obs = PointCloudObs {
            points: vec![Vec3::zeros()],
            provenance: vec![(0, 0)],
            scene_ref: 0,
        };
        let map = AffordanceMap::new(vec![0.5, 0.6]).unwrap();
        assert!(export_affordance(&obs, &map, 0).is_err());
    }
}
