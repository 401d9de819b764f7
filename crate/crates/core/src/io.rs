//! Plain-text formats.
//!
//! Trajectory files start with the header
//! `PAPTRAJ d n R t_min t_max steps` followed by one `re im` line per value,
//! snapshot after snapshot, each snapshot in row-major grid order. Scalar
//! signals use `d = 0`, `n = 1`, `R = 0`.
//!
//! Field files start with `PAPFIELD d n R` followed by `n^d` lines `re im`.
//!
//! Floats are written with 17 significant digits in the style of C's `%.17g`,
//! which round-trips every `f64`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, GridSpec};
use crate::pap::{SpaceNorm, TimeGrid, Trajectory};

/// Refuse files that would need more values than this.
pub const MAX_VALUES: usize = 1 << 26;

/// `printf("%.17g", x)`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-4..17).contains(&exp) {
        let s = format!("{:.*}", (16 - exp) as usize, x);
        strip_zeros(&s).to_string()
    } else {
        let m = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

/// Non-empty lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .or_else(|_| perr(line, format!("bad {what} '{tok}'")))
}

fn parse_values(
    body: impl Iterator<Item = (usize, String)>,
    count: usize,
    last_line: usize,
) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for (line, l) in body {
        if out.len() == count {
            return perr(line, format!("more than {count} values"));
        }
        let mut it = l.split_whitespace();
        let (Some(re), Some(im), None) = (it.next(), it.next(), it.next()) else {
            return perr(line, "expected 're im'");
        };
        let re: f64 = parse_num(re, line, "real part")?;
        let im: f64 = parse_num(im, line, "imaginary part")?;
        if !(re.is_finite() && im.is_finite()) {
            return perr(line, "values must be finite");
        }
        out.push(Complex64::new(re, im));
    }
    if out.len() != count {
        return perr(
            last_line,
            format!("expected {count} values, found {}", out.len()),
        );
    }
    Ok(out)
}

fn grid_from_header(d: usize, n: usize, r: f64, line: usize) -> Result<Option<GridSpec>> {
    if d == 0 {
        if n != 1 || r != 0.0 {
            return perr(line, "scalar files need n = 1 and R = 0");
        }
        return Ok(None);
    }
    if d > 3 || n > MAX_VALUES {
        return perr(line, format!("unsupported grid d={d} n={n}"));
    }
    let pts = (n as u128).pow(d as u32);
    if pts > MAX_VALUES as u128 {
        return perr(line, "grid too large");
    }
    GridSpec::new(d, n, r)
        .map(Some)
        .or_else(|e| perr(line, e.to_string()))
}

fn push_value(s: &mut String, v: &Complex64) {
    s.push_str(&format_g17(v.re));
    s.push(' ');
    s.push_str(&format_g17(v.im));
    s.push('\n');
}

/// Serialises a trajectory.
pub fn write_trajectory(f: &Trajectory) -> String {
    let t = f.time();
    let (d, n, r) = f.space().map_or((0, 1, 0.0), |g| {
        (g.dim(), g.points_per_axis(), g.half_width())
    });
    let mut s = format!(
        "PAPTRAJ {d} {n} {} {} {} {}\n",
        format_g17(r),
        format_g17(t.t_min()),
        format_g17(t.t_max()),
        t.steps()
    );
    for v in f.data() {
        push_value(&mut s, v);
    }
    s
}

/// Parses a trajectory; the result carries the modulus norm.
pub fn read_trajectory(text: &str) -> Result<Trajectory> {
    let mut it = lines(text);
    let Some((hl, header)) = it.next() else {
        return perr(1, "empty input");
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.first() != Some(&"PAPTRAJ") {
        return perr(hl, "missing PAPTRAJ header");
    }
    if toks.len() != 7 {
        return perr(hl, "header needs 'PAPTRAJ d n R t_min t_max steps'");
    }
    let d: usize = parse_num(toks[1], hl, "dimension")?;
    let n: usize = parse_num(toks[2], hl, "points per axis")?;
    let r: f64 = parse_num(toks[3], hl, "half width")?;
    let t_min: f64 = parse_num(toks[4], hl, "t_min")?;
    let t_max: f64 = parse_num(toks[5], hl, "t_max")?;
    let steps: usize = parse_num(toks[6], hl, "steps")?;
    let space = grid_from_header(d, n, r, hl)?;
    if steps >= MAX_VALUES {
        return perr(hl, "too many steps");
    }
    let time = TimeGrid::new(t_min, t_max, steps).or_else(|e| perr(hl, e.to_string()))?;
    let pts = space.map_or(1, |g| g.len());
    let count = pts.checked_mul(time.len()).filter(|c| *c <= MAX_VALUES);
    let Some(count) = count else {
        return perr(hl, "file too large");
    };
    let last = text.lines().count().max(1);
    let data = parse_values(it.map(|(i, l)| (i, l.to_string())), count, last)?;
    Trajectory::from_raw(time, space, data, SpaceNorm::Modulus).or_else(|e| perr(hl, e.to_string()))
}

/// Serialises a field.
pub fn write_field(u: &Field) -> String {
    let g = u.grid();
    let mut s = format!(
        "PAPFIELD {} {} {}\n",
        g.dim(),
        g.points_per_axis(),
        format_g17(g.half_width())
    );
    for v in u.values() {
        push_value(&mut s, v);
    }
    s
}

pub fn read_field(text: &str) -> Result<Field> {
    let mut it = lines(text);
    let Some((hl, header)) = it.next() else {
        return perr(1, "empty input");
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.first() != Some(&"PAPFIELD") {
        return perr(hl, "missing PAPFIELD header");
    }
    if toks.len() != 4 {
        return perr(hl, "header needs 'PAPFIELD d n R'");
    }
    let d: usize = parse_num(toks[1], hl, "dimension")?;
    let n: usize = parse_num(toks[2], hl, "points per axis")?;
    let r: f64 = parse_num(toks[3], hl, "half width")?;
    if d == 0 {
        return perr(hl, "fields need d >= 1");
    }
    let grid = grid_from_header(d, n, r, hl)?.expect("d >= 1");
    let last = text.lines().count().max(1);
    let data = parse_values(it.map(|(i, l)| (i, l.to_string())), grid.len(), last)?;
    Field::from_values(grid, data).or_else(|e| perr(hl, e.to_string()))
}

/// Minimal CSV writer: a header row and rows of floats.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            text: format!("{}\n", columns.join(",")),
            width: columns.len(),
        }
    }

    /// Appends a row; panics when the row width differs from the header.
    pub fn row(&mut self, values: &[f64]) -> &mut Self {
        assert_eq!(values.len(), self.width, "row width differs from header");
        let cells: Vec<String> = values.iter().map(|v| format_g17(*v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
        self
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        // reference strings from printf("%.17g")
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (1e-5, "1.0000000000000001e-05"),
            (1e-4, "0.0001"),
            (123456789.0, "123456789"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (1.0 / 3.0, "0.33333333333333331"),
            (6.02214076e23, "6.0221407599999999e+23"),
            (5e-324, "4.9406564584124654e-324"),
            (f64::MAX, "1.7976931348623157e+308"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g17(x), want, "{x:e}");
        }
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(f64::NAN), "nan");
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn g17_round_trips() {
        for x in [
            0.1,
            1.0 / 7.0,
            -3.25e-300,
            9.999999999999999e22,
            std::f64::consts::PI,
        ] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn trajectory_round_trip() {
        let grid = GridSpec::new(2, 4, 1.5).unwrap();
        let g = Field::from_fn(grid, |x| Complex64::new(x[0], x[1] * 0.1)).unwrap();
        let time = TimeGrid::new(-1.0, 1.0, 8).unwrap();
        let f = Trajectory::separable(time, |t| Complex64::new(t.cos(), t), &g, SpaceNorm::Modulus);
        let text = write_trajectory(&f);
        assert!(text.starts_with("PAPTRAJ 2 4 1.5 -1 1 8\n"));
        assert_eq!(read_trajectory(&text).unwrap(), f);
        let s = Trajectory::scalar_fn(time, |t| Complex64::new(t, 0.0)).unwrap();
        let text = write_trajectory(&s);
        assert!(text.starts_with("PAPTRAJ 0 1 0 "));
        assert_eq!(read_trajectory(&text).unwrap(), s);
    }

    #[test]
    fn field_round_trip() {
        let grid = GridSpec::new(3, 4, 2.0).unwrap();
        let u = Field::from_fn(grid, |x| Complex64::new(x[0] * x[1], x[2].sin())).unwrap();
        assert_eq!(read_field(&write_field(&u)).unwrap(), u);
    }

    #[test]
    fn malformed_inputs_report_lines() {
        assert!(matches!(read_field(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            read_field("PAPFIELD 1 4 1\n0 0\n0 0\n0 x\n0 0\n"),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(matches!(
            read_field("PAPFIELD 1 4 1\n0 0\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            read_field("PAPFIELD 1 4 1\n0 0\n0 0\n0 0\n0 0\n1 1\n"),
            Err(Error::Parse { line: 6, .. })
        ));
        assert!(read_field("PAPFIELD 3 100000 1\n").is_err());
        assert!(read_field("PAPFIELD 1 4 1\n0 0\n0 0\n0 nan\n0 0\n").is_err());
        assert!(read_trajectory("PAPTRAJ 0 2 0 0 1 8\n").is_err());
        assert!(read_trajectory("PAPTRAJ 1 4 1 1 0 8\n").is_err());
        assert!(read_trajectory("PAPTRAJ 1 4 1 0 1 99999999999999999999\n").is_err());
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[1.0, 0.5]).row(&[f64::NAN, -1e-7]);
        assert_eq!(c.finish(), "a,b\n1,0.5\nnan,-9.9999999999999995e-08\n");
    }
}
