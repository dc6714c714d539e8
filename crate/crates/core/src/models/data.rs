//! Dataset schemas and their CSV readers.
//!
//! * pairs `x,y` (correlation, logistic)
//! * positive reals `y` (gamma)
//! * censored `time,event` with event in {0,1} (Weibull); `futime,fustat`
//!   is accepted as an alias.

use std::io::Read;

use crate::error::{Error, Result};

/// Paired observations `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paired {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Paired {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "x and y differ in length");
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Right-censored observations: `time = min(Y, C)`, `event = 1(Y <= C)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CensoredObs {
    pub time: Vec<f64>,
    pub event: Vec<bool>,
}

impl CensoredObs {
    pub fn new(time: Vec<f64>, event: Vec<bool>) -> Self {
        assert_eq!(time.len(), event.len(), "time and event differ in length");
        Self { time, event }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }
}

fn read_columns<R: Read>(r: R, wanted: &[&[&str]]) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rd.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let mut idx = Vec::with_capacity(wanted.len());
    for aliases in wanted {
        let pos = header
            .iter()
            .position(|h| aliases.contains(&h))
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{}` in header", aliases[0]),
            })?;
        idx.push(pos);
    }
    let mut cols = vec![Vec::new(); wanted.len()];
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).ok_or_else(|| Error::Parse {
                line,
                message: "missing field".into(),
            })?;
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("row {line}: cannot parse `{field}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("row {line}: non-finite value"),
                });
            }
            cols[c].push(v);
        }
    }
    Ok(cols)
}

pub fn read_pairs<R: Read>(r: R) -> Result<Paired> {
    let mut cols = read_columns(r, &[&["x"], &["y"]])?;
    let y = cols.pop().unwrap_or_default();
    let x = cols.pop().unwrap_or_default();
    Ok(Paired { x, y })
}

pub fn read_positive<R: Read>(r: R) -> Result<Vec<f64>> {
    Ok(read_columns(r, &[&["y"]])?.pop().unwrap_or_default())
}

pub fn read_censored<R: Read>(r: R) -> Result<CensoredObs> {
    let mut cols = read_columns(r, &[&["time", "futime"], &["event", "fustat"]])?;
    let ev = cols.pop().unwrap_or_default();
    let time = cols.pop().unwrap_or_default();
    let mut event = Vec::with_capacity(ev.len());
    for (i, e) in ev.into_iter().enumerate() {
        if e != 0.0 && e != 1.0 {
            return Err(Error::Parse {
                line: i as u64 + 2,
                message: format!("row {}: event must be 0 or 1, got {e}", i + 2),
            });
        }
        event.push(e == 1.0);
    }
    Ok(CensoredObs { time, event })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_pairs() {
        let p = read_pairs("x,y\n1,2\n3.5,-4\n".as_bytes()).unwrap();
        assert_eq!(p.x, vec![1.0, 3.5]);
        assert_eq!(p.y, vec![2.0, -4.0]);
    }

    #[test]
    fn malformed_row_names_line() {
        let err = read_pairs("x,y\n1,2\n3,abc\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("row 3"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn censored_aliases_and_flags() {
        let c = read_censored("futime,fustat\n5,1\n7,0\n".as_bytes()).unwrap();
        assert_eq!(c.time, vec![5.0, 7.0]);
        assert_eq!(c.event, vec![true, false]);
        assert!(read_censored("time,event\n5,2\n".as_bytes()).is_err());
        assert!(read_positive("x\n1\n".as_bytes()).is_err());
    }
}
