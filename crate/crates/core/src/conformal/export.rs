//! CSV and SVG output of the conformal sample cloud and radial profile.

use std::fmt::Write as _;

use super::{ConformalField, RadialProfile};

/// `u,v,rho_inv` for every valid sample.
pub fn points_csv(cf: &ConformalField<'_>) -> String {
    let mut out = String::from("u,v,rho_inv\n");
    for s in cf.valid_samples() {
        let _ = writeln!(out, "{:.9},{:.9},{:.9}", s.u, s.v, s.rho_inv());
    }
    out
}

/// `radius,rho_inv,count` per circle.
pub fn profile_csv(p: &RadialProfile) -> String {
    let mut out = String::from("radius,rho_inv,count\n");
    for ((r, q), c) in p.radii.iter().zip(&p.rho_inv).zip(&p.counts) {
        let _ = writeln!(out, "{r:.9},{q:.9},{c}");
    }
    out
}

/// Scatter of the valid samples in the image plane, colored by `ρ⁻¹` on a
/// blue-to-red ramp between its 2nd and 98th percentiles.
pub fn rho_inv_svg(cf: &ConformalField<'_>, size_px: f64) -> String {
    let pts: Vec<(f64, f64, f64)> = cf.valid_samples().map(|s| (s.u, s.v, s.rho_inv())).collect();
    let mut vals: Vec<f64> = pts.iter().map(|p| p.2).collect();
    vals.sort_by(f64::total_cmp);
    let pick = |q: f64| vals.get(((vals.len().max(1) - 1) as f64 * q) as usize).copied().unwrap_or(0.0);
    let (lo, hi) = (pick(0.02), pick(0.98));
    let ext = pts.iter().fold(1e-9f64, |m, p| m.max(p.0.abs()).max(p.1.abs()));
    let scale = 0.5 * size_px / ext;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size_px}" height="{size_px}" viewBox="0 0 {size_px} {size_px}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (u, v, q) in pts {
        let t = if hi > lo { ((q - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        let (r, b) = ((255.0 * t) as u8, (255.0 * (1.0 - t)) as u8);
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1" fill="rgb({r},40,{b})"/>"#,
            0.5 * size_px + u * scale,
            0.5 * size_px - v * scale
        );
    }
    out.push_str("</svg>\n");
    out
}
