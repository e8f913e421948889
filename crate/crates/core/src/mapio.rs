//! Plain-text map interchange.
//!
//! ```text
//! # specsurvey radio map v1
//! rows 32
//! cols 32
//! spacing_m 3
//! origin 0 0
//! transmitters 1
//! 40.5 12.25 20 10 2400000000      # x y height_m power_dbm carrier_hz
//! layers 1
//! layer 0
//! -61.2 -61.0 ...                   # `rows` lines of `cols` values, dB
//! buildings 3
//! 17 18 49
//! ```
//!
//! Blank lines and `#` comments are ignored. `transmitters` may be 0 for
//! maps from external tools (ray tracers). Values are written in shortest
//! round-trip form, so export followed by import is lossless.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, Point2};
use crate::model::{RadioMap, Transmitter};

pub fn to_text(map: &RadioMap) -> String {
    let g = &map.grid;
    let mut out = String::new();
    let _ = writeln!(out, "# specsurvey radio map v1");
    let _ = writeln!(out, "rows {}", g.rows());
    let _ = writeln!(out, "cols {}", g.cols());
    let _ = writeln!(out, "spacing_m {}", g.spacing_m());
    let _ = writeln!(out, "origin {} {}", g.origin().x, g.origin().y);
    let _ = writeln!(out, "transmitters {}", map.transmitters.len());
    for tx in &map.transmitters {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            tx.position.x, tx.position.y, tx.height_m, tx.power_dbm, tx.carrier_hz
        );
    }
    let _ = writeln!(out, "layers {}", map.per_tx_power_db.len());
    for (l, layer) in map.per_tx_power_db.iter().enumerate() {
        let _ = writeln!(out, "layer {l}");
        for row in layer.chunks(g.cols()) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    let buildings: Vec<String> = g.buildings().map(|k| k.to_string()).collect();
    let _ = writeln!(out, "buildings {}", buildings.len());
    let _ = writeln!(out, "{}", buildings.join(" "));
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Self { inner: it.peekable() }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner.next().ok_or(Error::Format {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn peek_line(&mut self) -> usize {
        self.inner.peek().map_or(0, |(n, _)| *n)
    }

    /// `key value...` line; returns the value tokens.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next(key)?;
        let mut tok = line.split_whitespace();
        if tok.next() != Some(key) {
            return Err(Error::Format {
                line: n,
                msg: format!("expected `{key}`"),
            });
        }
        Ok((n, tok.collect()))
    }
}

fn parse<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Format {
        line,
        msg: format!("cannot parse `{tok}`"),
    })
}

fn one<T: std::str::FromStr>(lines: &mut Lines<'_>, key: &str) -> Result<T> {
    let (n, v) = lines.keyed(key)?;
    match v.as_slice() {
        [x] => parse(x, n),
        _ => Err(Error::Format {
            line: n,
            msg: format!("`{key}` takes one value"),
        }),
    }
}

fn floats(tokens: &[&str], expected: usize, line: usize) -> Result<Vec<f64>> {
    if tokens.len() != expected {
        return Err(Error::Format {
            line,
            msg: format!("expected {expected} values, found {}", tokens.len()),
        });
    }
    tokens.iter().map(|t| parse(t, line)).collect()
}

pub fn from_text(text: &str) -> Result<RadioMap> {
    let mut lines = Lines::new(text);
    let rows: usize = one(&mut lines, "rows")?;
    let cols: usize = one(&mut lines, "cols")?;
    let spacing: f64 = one(&mut lines, "spacing_m")?;
    let (n, o) = lines.keyed("origin")?;
    let o = floats(&o, 2, n)?;
    let grid = GridGeometry::new(rows, cols, spacing, Point2::new(o[0], o[1]))?;

    let ntx: usize = one(&mut lines, "transmitters")?;
    let mut transmitters = Vec::with_capacity(ntx);
    for _ in 0..ntx {
        let (n, line) = lines.next("transmitter line")?;
        let v = floats(&line.split_whitespace().collect::<Vec<_>>(), 5, n)?;
        transmitters.push(Transmitter {
            position: Point2::new(v[0], v[1]),
            height_m: v[2],
            power_dbm: v[3],
            carrier_hz: v[4],
        });
    }

    let nlayers: usize = one(&mut lines, "layers")?;
    let mut layers = Vec::with_capacity(nlayers);
    for l in 0..nlayers {
        let idx: usize = one(&mut lines, "layer")?;
        if idx != l {
            return Err(Error::Format {
                line: lines.peek_line(),
                msg: format!("layer {idx} out of order, expected {l}"),
            });
        }
        let mut layer = Vec::with_capacity(grid.len());
        for _ in 0..rows {
            let (n, line) = lines.next("layer row")?;
            layer.extend(floats(&line.split_whitespace().collect::<Vec<_>>(), cols, n)?);
        }
        layers.push(layer);
    }

    let nb: usize = one(&mut lines, "buildings")?;
    let mut buildings = Vec::with_capacity(nb);
    while buildings.len() < nb {
        let (n, line) = lines.next("building indices")?;
        for t in line.split_whitespace() {
            buildings.push(parse::<usize>(t, n)?);
        }
    }
    if buildings.len() != nb {
        return Err(Error::Format {
            line: lines.peek_line(),
            msg: format!("expected {nb} building indices, found {}", buildings.len()),
        });
    }
    if let Ok((n, _)) = lines.next("") {
        return Err(Error::Format {
            line: n,
            msg: "trailing content".into(),
        });
    }
    let grid = grid.with_buildings(buildings)?;
    RadioMap::from_layers(grid, transmitters, layers)
}

pub fn write_text(map: &RadioMap, path: &Path) -> Result<()> {
    fs::write(path, to_text(map))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<RadioMap> {
    from_text(&fs::read_to_string(path)?)
}

/// One row per grid point: indices, coordinates, building flag, every layer
/// and the combined power.
pub fn write_csv<W: Write>(map: &RadioMap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string(), "col".into(), "x_m".into(), "y_m".into(), "building".into()];
    header.extend((0..map.num_layers()).map(|l| format!("layer{l}_db")));
    header.push("combined_db".into());
    w.write_record(&header)?;
    let g = &map.grid;
    for k in 0..g.len() {
        let (i, j) = g.coords(k);
        let p = g.point(k);
        let mut rec = vec![
            i.to_string(),
            j.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            u8::from(g.is_building(k)).to_string(),
        ];
        rec.extend(map.per_tx_power_db.iter().map(|l| l[k].to_string()));
        rec.push(map.combined_power_db[k].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
