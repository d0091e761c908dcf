//! Minimal SVG line rendering of DET curves (FAR on x, FRR on y).

use voxvec_core::eval::DetPoint;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 50.0;

fn x_of(v: f64) -> f64 {
    MARGIN + v * (SIZE - 2.0 * MARGIN)
}

fn y_of(v: f64) -> f64 {
    SIZE - MARGIN - v * (SIZE - 2.0 * MARGIN)
}

/// Render one DET curve with gridlines, the chance diagonal, and the EER
/// crossing marked.
pub fn det_svg(title: &str, points: &[DetPoint], eer: f64) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Gridlines every 0.2.
    for i in 0..=5 {
        let v = i as f64 * 0.2;
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            x_of(v), y_of(0.0), x_of(v), y_of(1.0)
        ));
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            x_of(0.0), y_of(v), x_of(1.0), y_of(v)
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{v:.1}</text>\n",
            x_of(v), y_of(0.0) + 16.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{v:.1}</text>\n",
            x_of(0.0) - 6.0, y_of(v) + 4.0
        ));
    }
    // Chance diagonal (FAR = FRR).
    s.push_str(&format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n",
        x_of(0.0), y_of(0.0), x_of(1.0), y_of(1.0)
    ));
    // The staircase itself.
    let path: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x_of(p.far), y_of(p.frr)))
        .collect();
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        path.join(" ")
    ));
    // EER marker on the diagonal.
    s.push_str(&format!(
        "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"#1f77b4\"/>\n",
        x_of(eer), y_of(eer)
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">EER = {:.2}%</text>\n",
        x_of(eer) + 8.0, y_of(eer) - 8.0, eer * 100.0
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        SIZE / 2.0
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">false accept rate</text>\n",
        SIZE / 2.0, SIZE - 10.0
    ));
    s.push_str("</svg>\n");
    s
}
