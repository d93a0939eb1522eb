//! One frame as a standalone SVG document.

use std::fmt::Write as _;

use castelet_core::scene::{Layer, LayerSource, RenderFrame, Rgba};

fn path_data(out: &mut String, ring: &[[f64; 2]]) {
    for (i, [x, y]) in ring.iter().enumerate() {
        let _ = write!(out, "{}{:.3},{:.3} ", if i == 0 { 'M' } else { 'L' }, x, y);
    }
    out.push('Z');
}

fn fill(c: Rgba) -> String {
    let byte = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("rgb({},{},{})\" fill-opacity=\"{:.4}", byte(c.r), byte(c.g), byte(c.b), c.a)
}

fn layer_id(layer: &Layer) -> String {
    match &layer.source {
        LayerSource::Silhouette { oav } => format!("silhouette-{oav}"),
        LayerSource::Shadow { oav, light, screen } => format!("shadow-{oav}-{light}-{screen}"),
    }
}

/// Layers paint in frame order; holes cut through with the even-odd rule.
pub fn frame_to_svg(frame: &RenderFrame, viewport: [f64; 2], background: Rgba) -> String {
    let [w, h] = viewport;
    let mut out = String::new();
    let _ = writeln!(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">");
    let _ = writeln!(out, "<!-- tick {} t={:.4}s -->", frame.tick, frame.time);
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"{}\"/>", fill(background));
    for layer in &frame.layers {
        let mut d = String::new();
        path_data(&mut d, &layer.polygon);
        for hole in &layer.holes {
            d.push(' ');
            path_data(&mut d, hole);
        }
        let _ = writeln!(out, "<path id=\"{}\" fill-rule=\"evenodd\" fill=\"{}\" d=\"{d}\"/>", layer_id(layer), fill(layer.color));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_path_per_layer() {
        let frame = RenderFrame {
            tick: 3,
            time: 0.05,
            layers: vec![Layer {
                source: LayerSource::Shadow {
                    oav: "a".into(),
                    light: "key".into(),
                    screen: "s".into(),
                },
                polygon: vec![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]],
                holes: vec![vec![[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]]],
                color: Rgba::new(0.0, 0.0, 0.0, 0.7),
                depth: 1.0,
            }],
        };
        let svg = frame_to_svg(&frame, [64.0, 48.0], Rgba::new(1.0, 0.9, 0.7, 1.0));
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains("id=\"shadow-a-key-s\""));
        assert!(svg.contains("M0.000,0.000 L10.000,0.000 L0.000,10.000 Z M1.000,1.000"));
        assert!(svg.contains("fill-opacity=\"0.7000\""));
    }
}
