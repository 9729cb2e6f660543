//! Point-set files: JSON (canonical), CSV export, SVG rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{self, Line};
use crate::point::PointSet;

pub fn to_json(set: &PointSet) -> String {
    serde_json::to_string(set).expect("point sets always serialize")
}

pub fn from_json(text: &str) -> Result<PointSet> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_json(set: &PointSet, path: &Path) -> Result<()> {
    fs::write(path, to_json(set) + "\n")?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<PointSet> {
    from_json(&fs::read_to_string(path)?)
}

fn csv_into<W: std::io::Write>(set: &PointSet, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    out.write_record((1..=set.grid().d).map(|i| format!("x{i}"))).map_err(csv_err)?;
    for p in set {
        out.serialize(p.coords()).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One point per row under an `x1,...,xd` header.
pub fn to_csv(set: &PointSet) -> String {
    let mut buf = Vec::new();
    csv_into(set, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is ascii")
}

pub fn write_csv(set: &PointSet, path: &Path) -> Result<()> {
    csv_into(set, fs::File::create(path)?)
}

const CELL: i64 = 16;
const MARGIN: i64 = 16;

/// The `count` non-axis lines with the most points of `set`, heaviest
/// first, ties in canonical order.
pub fn heaviest_lines(set: &PointSet, count: usize) -> Result<Vec<(Line, u32)>> {
    let mut lines: Vec<(Line, u32)> =
        geometry::line_hits(set, 2).into_iter().filter(|(l, _)| !l.is_axis()).collect();
    lines.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    lines.truncate(count);
    Ok(lines)
}

/// Grid, points, and optionally the `overlay` heaviest non-axis lines.
/// `x` runs left to right and `y` bottom to top. Output depends only on
/// the input.
pub fn render_svg(set: &PointSet, overlay: usize) -> Result<String> {
    let g = set.grid();
    if g.d != 2 {
        return Err(Error::invalid("rendering needs a planar set"));
    }
    let n = g.n as i64;
    let size = 2 * MARGIN + (n - 1) * CELL;
    let px = |x: i64| MARGIN + (x - 1) * CELL;
    let py = |y: i64| size - MARGIN - (y - 1) * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r##"<rect width="{size}" height="{size}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r##"<g stroke="#dddddd" stroke-width="1">"##);
    for i in 1..=n {
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, px(i), py(1), px(i), py(n));
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, px(1), py(i), px(n), py(i));
    }
    s.push_str("</g>\n");
    if overlay > 0 {
        let _ = writeln!(s, r##"<g stroke="#d62728" stroke-width="2" stroke-opacity="0.7">"##);
        for (line, _) in heaviest_lines(set, overlay)? {
            let pts = geometry::points_on_line(&line, &g);
            let (a, b) = (pts[0], pts[pts.len() - 1]);
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                px(a.x() as i64),
                py(a.y() as i64),
                px(b.x() as i64),
                py(b.y() as i64)
            );
        }
        s.push_str("</g>\n");
    }
    let _ = writeln!(s, r##"<g fill="#1f4e9c">"##);
    for p in set {
        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="4"/>"#, px(p.x() as i64), py(p.y() as i64));
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::{GridParams, GridPoint};

    #[test]
    fn json_layout_is_canonical() {
        let g = GridParams::plane(3).unwrap();
        let set = PointSet::from_points(g, [GridPoint::xy(2, 1), GridPoint::xy(1, 3)]).unwrap();
        assert_eq!(to_json(&set), r#"{"n":3,"d":2,"points":[[1,3],[2,1]]}"#);
        assert_eq!(from_json(&to_json(&set)).unwrap(), set);
    }

    #[test]
    fn malformed_files_are_rejected() {
        for bad in [
            r#"{"n":3,"d":2,"points":[[4,1]]}"#,
            r#"{"n":3,"d":2,"points":[[1,1],[1,1]]}"#,
            r#"{"n":3,"d":2,"points":[[1,1,1]]}"#,
            r#"{"n":3,"points":[]}"#,
            r#"{"n":0,"d":2,"points":[]}"#,
            "not json",
        ] {
            assert!(from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn csv_rows() {
        let g = GridParams::new(2, 3).unwrap();
        let set = PointSet::from_points(g, [GridPoint::new(&[1, 2, 1])]).unwrap();
        assert_eq!(to_csv(&set), "x1,x2,x3\n1,2,1\n");
    }

    #[test]
    fn svg_of_small_grid() {
        let set = PointSet::full(GridParams::plane(2).unwrap());
        let svg = render_svg(&set, 0).unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg, render_svg(&set.clone(), 0).unwrap());
        let big = PointSet::full(GridParams::plane(6).unwrap());
        let with = render_svg(&big, 5).unwrap();
        let without = render_svg(&big, 0).unwrap();
        assert_eq!(with.matches("<line").count() - without.matches("<line").count(), 5);
    }
}
