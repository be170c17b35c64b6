//! CSV tables and SVG figures for stored artifacts.

use std::fmt::Write;

use ndarray::Array2;

use crate::atlas::{DensityGrid, ExpectedPattern, GridConfig, Rgb, UnitAssignment, CLASS_PALETTE};
use crate::experiments::{AttackTrajectory, Constellation};
use crate::introspector::{EstimatorModel, LatentPoint};
use crate::{Error, Result};

fn hex(c: Rgb) -> String {
    let b = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", b(c[0]), b(c[1]), b(c[2]))
}

pub fn latents_csv(ids: &[usize], points: &[LatentPoint], labels: &[u8], e_log10: Option<&[f64]>) -> String {
    let mut out = String::from(if e_log10.is_some() {
        "sample_id,label,z1,z2,e_log10\n"
    } else {
        "sample_id,label,z1,z2\n"
    });
    for i in 0..points.len() {
        write!(out, "{},{},{},{}", ids[i], labels[i], points[i].z1, points[i].z2).unwrap();
        if let Some(e) = e_log10 {
            write!(out, ",{}", e[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Long format: one row per grid node.
pub fn density_csv(grids: &[DensityGrid]) -> String {
    let mut out = String::from("class,z1,z2,density\n");
    for g in grids {
        for ((i, j), v) in g.values.indexed_iter() {
            writeln!(out, "{},{},{},{}", g.class, g.config.coord(i), g.config.coord(j), v).unwrap();
        }
    }
    out
}

/// One row per class, then one column per hidden unit.
pub fn patterns_csv(patterns: &[ExpectedPattern]) -> String {
    let units = patterns.first().map_or(0, |p| p.e_h.len());
    let mut out = String::from("class,ez1,ez2");
    for u in 0..units {
        write!(out, ",h{u}").unwrap();
    }
    out.push('\n');
    for p in patterns {
        write!(out, "{},{},{}", p.class, p.e_z.z1, p.e_z.z2).unwrap();
        for v in &p.e_h {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// One row per unit in sorted order.
pub fn assignment_csv(a: &UnitAssignment, colors: Option<&[Rgb]>) -> String {
    let mut out = String::from("layer,new_index,old_index,class");
    if colors.is_some() {
        out.push_str(",r,g,b");
    }
    out.push('\n');
    let mut offset = 0;
    for (l, (perm, &w)) in a.permutations.iter().zip(&a.layer_widths).enumerate() {
        for (new, &old) in perm.iter().enumerate() {
            write!(out, "{l},{new},{old},{}", a.classes[offset + old]).unwrap();
            if let Some(c) = colors {
                let c = c[offset + old];
                write!(out, ",{},{},{}", c[0], c[1], c[2]).unwrap();
            }
            out.push('\n');
        }
        offset += w;
    }
    out
}

pub fn constellation_csv(cs: &[Constellation]) -> String {
    let mut out = String::from("sample_id,sigma,draw,z1,z2,dz1,dz2,label,e_log10\n");
    for c in cs {
        for (k, (p, d)) in c.points.iter().zip(c.displacements()).enumerate() {
            writeln!(
                out,
                "{},{},{k},{},{},{},{},{},{}",
                c.sample_id, c.sigma, p.z.z1, p.z.z2, d.0, d.1, p.label, p.e_log10
            )
            .unwrap();
        }
    }
    out
}

/// One row per executed step.
pub fn trajectory_csv(t: &AttackTrajectory) -> String {
    let mut out = String::from("step,input_hash,z1,z2,label");
    for k in 0..t.steps.first().map_or(0, |s| s.y_hat.len()) {
        write!(out, ",y{k}").unwrap();
    }
    out.push('\n');
    for s in &t.steps {
        write!(out, "{},{},{},{},{}", s.step, s.input_hash, s.z.z1, s.z.z2, s.label).unwrap();
        for v in &s.y_hat {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn attacks_csv(ts: &[AttackTrajectory]) -> String {
    let mut out = String::from("sample_id,target,eps,steps,success,success_step\n");
    for t in ts {
        let s = t.success_step.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{s}",
            t.sample_id,
            t.target,
            t.eps,
            t.steps.len(),
            t.success as u8
        )
        .unwrap();
    }
    out
}

/// Estimator output at every node of `grid`, laid out like a density grid.
pub fn estimator_heatmap(est: &EstimatorModel, grid: &GridConfig) -> Result<Array2<f64>> {
    grid.validate()?;
    let n = grid.nodes();
    let z = Array2::from_shape_fn((n * n, 2), |(r, d)| {
        grid.coord(if d == 0 { r / n } else { r % n }) as f32
    });
    let e = est.estimate_batch(z.view())?;
    Ok(Array2::from_shape_vec((n, n), e.to_vec()).expect("n * n values"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub z: LatentPoint,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterStyle {
    pub grid: GridConfig,
    pub size: f64,
    pub radius: f64,
    /// Background values on the grid nodes, e.g. estimated log errors.
    pub heatmap: Option<Array2<f64>>,
    /// Drawn as polylines over the points.
    pub paths: Vec<Vec<LatentPoint>>,
    pub title: Option<String>,
}

impl Default for ScatterStyle {
    fn default() -> Self {
        ScatterStyle {
            grid: GridConfig::default(),
            size: 480.0,
            radius: 1.5,
            heatmap: None,
            paths: Vec::new(),
            title: None,
        }
    }
}

const MARGIN: f64 = 40.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Latent-plane scatter, one circle per point coloured by class.
pub fn scatter_svg(points: &[ScatterPoint], style: &ScatterStyle) -> Result<String> {
    if points.is_empty() {
        return Err(Error::InvalidInput("nothing to plot".into()));
    }
    let g = &style.grid;
    g.validate()?;
    let span = g.hi - g.lo;
    let px = |v: f64| MARGIN + (v - g.lo) / span * style.size;
    let py = |v: f64| MARGIN + (g.hi - v) / span * style.size;
    let total = style.size + 2.0 * MARGIN;
    let mut s = String::new();
    writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{total}" height="{total}" viewBox="0 0 {total} {total}">
<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#
    )
    .unwrap();

    if let Some(h) = &style.heatmap {
        if h.dim() != (g.nodes(), g.nodes()) {
            return Err(Error::Shape(format!(
                "heatmap {:?} does not match a {n}x{n} grid",
                h.dim(),
                n = g.nodes()
            )));
        }
        let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cell = g.step / span * style.size;
        s.push_str("<g class=\"heatmap\">\n");
        for ((i, j), &v) in h.indexed_iter() {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            let c = hex([1.0, 1.0 - 0.8 * t, 1.0 - t]);
            writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{c}"/>"#,
                px(g.coord(i)) - cell / 2.0,
                py(g.coord(j)) - cell / 2.0,
            )
            .unwrap();
        }
        s.push_str("</g>\n");
    }

    // Frame and axes.
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{0}" height="{0}" fill="none" stroke="black"/>"#,
        style.size
    )
    .unwrap();
    if g.lo < 0.0 && g.hi > 0.0 {
        writeln!(
            s,
            r##"<line x1="{0}" y1="{MARGIN}" x2="{0}" y2="{1}" stroke="#999" stroke-dasharray="3,3"/>
<line x1="{MARGIN}" y1="{2}" x2="{1}" y2="{2}" stroke="#999" stroke-dasharray="3,3"/>"##,
            px(0.0),
            MARGIN + style.size,
            py(0.0)
        )
        .unwrap();
    }
    let bottom = MARGIN + style.size;
    writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="11">{}</text>
<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>
<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">z1</text>
<text x="12" y="{:.1}" font-size="12" text-anchor="middle">z2</text>
<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>
<text x="{:.1}" y="{MARGIN}" font-size="11" text-anchor="end">{}</text>"#,
        bottom + 14.0,
        g.lo,
        bottom,
        bottom + 14.0,
        g.hi,
        MARGIN + style.size / 2.0,
        bottom + 28.0,
        MARGIN + style.size / 2.0,
        MARGIN - 4.0,
        bottom,
        g.lo,
        MARGIN - 4.0,
        g.hi,
    )
    .unwrap();
    if let Some(t) = &style.title {
        writeln!(
            s,
            r#"<text x="{:.1}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
            total / 2.0,
            xml_escape(t)
        )
        .unwrap();
    }

    s.push_str("<g class=\"points\">\n");
    for p in points {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{}" fill="{}"/>"#,
            px(p.z.z1),
            py(p.z.z2),
            style.radius,
            hex(CLASS_PALETTE[p.class % CLASS_PALETTE.len()])
        )
        .unwrap();
    }
    s.push_str("</g>\n");

    for path in style.paths.iter().filter(|p| !p.is_empty()) {
        let pts: Vec<String> = path
            .iter()
            .map(|z| format!("{:.2},{:.2}", px(z.z1), py(z.z2)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// One rectangle per unit, one row per layer.
pub fn brainbow_svg(colors: &[Rgb], layer_widths: &[usize]) -> Result<String> {
    if colors.len() != layer_widths.iter().sum::<usize>() {
        return Err(Error::Shape("one colour per unit required".into()));
    }
    let cell = 6.0;
    let row = 20.0;
    let widest = layer_widths.iter().copied().max().unwrap_or(0) as f64;
    let w = widest * cell + 2.0 * MARGIN;
    let h = layer_widths.len() as f64 * row + 2.0 * MARGIN;
    let mut s = String::new();
    writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    )
    .unwrap();
    let mut offset = 0;
    for (l, &width) in layer_widths.iter().enumerate() {
        let y = MARGIN + l as f64 * row;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">L{l}</text>"#,
            MARGIN - 4.0,
            y + cell + 2.0
        )
        .unwrap();
        for u in 0..width {
            writeln!(
                s,
                r#"<rect x="{:.1}" y="{y:.1}" width="{cell}" height="{:.1}" fill="{}"/>"#,
                MARGIN + u as f64 * cell,
                row - 6.0,
                hex(colors[offset + u])
            )
            .unwrap();
        }
        offset += width;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::tests::random_stack;

    fn pts(n: usize) -> Vec<ScatterPoint> {
        (0..n)
            .map(|i| ScatterPoint {
                z: LatentPoint::new(i as f64 * 0.5 - 1.0, 0.3),
                class: i,
            })
            .collect()
    }

    #[test]
    fn one_circle_per_point_and_no_stray_polylines() {
        let svg = scatter_svg(&pts(3), &ScatterStyle::default()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert!(svg.contains(">z1<") && svg.contains(">z2<"));
        let style = ScatterStyle {
            paths: vec![vec![LatentPoint::new(0.0, 0.0), LatentPoint::new(1.0, 1.0)]],
            ..Default::default()
        };
        assert_eq!(scatter_svg(&pts(2), &style).unwrap().matches("<polyline").count(), 1);
        assert!(scatter_svg(&[], &ScatterStyle::default()).is_err());
    }

    #[test]
    fn heatmap_matches_the_density_grid() {
        let owned = random_stack(2);
        let grid = GridConfig::default();
        let h = estimator_heatmap(&owned.estimator, &grid).unwrap();
        assert_eq!(h.dim(), (81, 81));
        let z = LatentPoint::new(grid.coord(10), grid.coord(70));
        let direct = owned.estimator.estimate(z).unwrap();
        assert_eq!(h[[10, 70]], direct);
        let style = ScatterStyle {
            heatmap: Some(h),
            ..Default::default()
        };
        let svg = scatter_svg(&pts(1), &style).unwrap();
        assert!(svg.matches("<rect").count() >= 81 * 81);
        let bad = ScatterStyle {
            heatmap: Some(Array2::zeros((80, 81))),
            ..Default::default()
        };
        assert!(scatter_svg(&pts(1), &bad).is_err());
    }

    #[test]
    fn brainbow_has_one_rect_per_unit() {
        let colors = vec![[0.5, 0.2, 0.1]; 7];
        let svg = brainbow_svg(&colors, &[3, 4]).unwrap();
        // Background plus one per unit.
        assert_eq!(svg.matches("<rect").count(), 8);
        assert!(svg.contains("#80331a"));
        assert!(brainbow_svg(&colors, &[3, 3]).is_err());
    }

    #[test]
    fn csv_headers_and_rows() {
        let z = vec![LatentPoint::new(0.5, -1.0), LatentPoint::new(2.0, 0.0)];
        let csv = latents_csv(&[4, 9], &z, &[1, 2], Some(&[-3.0, -1.5]));
        assert_eq!(csv, "sample_id,label,z1,z2,e_log10\n4,1,0.5,-1,-3\n9,2,2,0,-1.5\n");
        let a = UnitAssignment {
            layer_widths: vec![2],
            classes: vec![3, 1],
            permutations: vec![vec![1, 0]],
        };
        assert_eq!(assignment_csv(&a, None), "layer,new_index,old_index,class\n0,0,1,1\n0,1,0,3\n");
    }
}
