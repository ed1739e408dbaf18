//! Plain-text Q-table artifact.
//!
//! ```text
//! cogrelay-qtable 1
//! levels 4
//! thresholds 6 12
//! mask 1111
//! alpha 0.5
//! gamma 0.9
//! states 2048
//! <Q(0,a1)> <Q(0,a2)> <Q(0,a3)> <Q(0,a4)>
//! ...                                      (one line per state)
//! ```
//!
//! `mask` lists a1..a4 as `1` (allowed) or `0`. `thresholds` may be empty.
//! Values use the shortest representation that round-trips exactly, so
//! writing the same table twice yields identical bytes.

use std::io::{BufRead, Write};

use crate::error::ArtifactError;
use crate::rl::levels::{LevelScheme, StateEncoder, StateIndex};
use crate::rl::qtable::QTable;
use crate::simcore::{Action, ActionMask};

pub const QTABLE_MAGIC: &str = "cogrelay-qtable";
pub const QTABLE_VERSION: u32 = 1;

pub fn write_qtable<W: Write>(table: &QTable, mut out: W) -> Result<(), ArtifactError> {
    let scheme = table.encoder().scheme();
    writeln!(out, "{QTABLE_MAGIC} {QTABLE_VERSION}")?;
    writeln!(out, "levels {}", scheme.n_levels())?;
    write!(out, "thresholds")?;
    for t in scheme.thresholds() {
        write!(out, " {t}")?;
    }
    writeln!(out)?;
    let mask: String = Action::ALL.iter().map(|&a| if table.mask().contains(a) { '1' } else { '0' }).collect();
    writeln!(out, "mask {mask}")?;
    writeln!(out, "alpha {}", table.alpha())?;
    writeln!(out, "gamma {}", table.gamma())?;
    writeln!(out, "states {}", table.state_count())?;
    for s in 0..table.state_count() {
        let row = table.row(StateIndex(s));
        writeln!(out, "{} {} {} {}", row[0], row[1], row[2], row[3])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_qtable<R: BufRead>(input: R) -> Result<QTable, ArtifactError> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |key: &str| -> Result<(usize, String), ArtifactError> {
        let (n, line) = lines.next().ok_or_else(|| fmt_err(0, format!("unexpected end of file, expected `{key}`")))?;
        let line = line?;
        let rest = line
            .strip_prefix(key)
            .ok_or_else(|| fmt_err(n, format!("expected `{key}`")))?;
        if !(rest.is_empty() || rest.starts_with(' ')) {
            return Err(fmt_err(n, format!("expected `{key}`")));
        }
        Ok((n, rest.trim().to_string()))
    };

    let (n, version) = next(QTABLE_MAGIC)?;
    if version != QTABLE_VERSION.to_string() {
        return Err(fmt_err(n, format!("unsupported format version {version}")));
    }
    let (n, levels) = next("levels")?;
    let levels: u32 = parse(n, &levels)?;
    let (n, thresholds) = next("thresholds")?;
    let thresholds = thresholds
        .split_whitespace()
        .map(|t| parse::<u32>(n, t))
        .collect::<Result<Vec<_>, _>>()?;
    let scheme = LevelScheme::new(levels, thresholds).map_err(|e| fmt_err(n, e.to_string()))?;
    let (n, mask_text) = next("mask")?;
    if mask_text.len() != 4 || !mask_text.chars().all(|c| c == '0' || c == '1') {
        return Err(fmt_err(n, format!("mask must be four 0/1 flags, got `{mask_text}`")));
    }
    let bits = mask_text.chars().enumerate().fold(0u8, |m, (i, c)| if c == '1' { m | (1 << i) } else { m });
    let mask = ActionMask::from_bits(bits).expect("four bits");
    let (n_alpha, alpha) = next("alpha")?;
    let alpha: f64 = parse(n_alpha, &alpha)?;
    let (n, gamma) = next("gamma")?;
    let gamma: f64 = parse(n, &gamma)?;
    let (n, states) = next("states")?;
    let states: usize = parse(n, &states)?;
    let encoder = StateEncoder::new(scheme);
    if states != encoder.state_count() {
        return Err(fmt_err(n, format!("{states} states does not match the level scheme ({})", encoder.state_count())));
    }

    let mut values = Vec::with_capacity(states * Action::COUNT);
    for s in 0..states {
        let (n, line) = lines.next().ok_or_else(|| fmt_err(0, format!("missing value row for state {s}")))?;
        let line = line?;
        let row = line.split_whitespace().map(|v| parse::<f64>(n, v)).collect::<Result<Vec<_>, _>>()?;
        if row.len() != Action::COUNT {
            return Err(fmt_err(n, format!("expected {} values, got {}", Action::COUNT, row.len())));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(fmt_err(n, format!("non-finite value {v}")));
        }
        values.extend(row);
    }
    if let Some((n, line)) = lines.next() {
        if !line?.trim().is_empty() {
            return Err(fmt_err(n, "trailing data after value matrix".into()));
        }
    }
    QTable::from_parts(encoder, mask, alpha, gamma, values).map_err(|e| fmt_err(n_alpha, e.to_string()))
}

fn parse<T: std::str::FromStr>(line: usize, text: &str) -> Result<T, ArtifactError> {
    text.parse().map_err(|_| fmt_err(line, format!("cannot parse `{text}`")))
}

fn fmt_err(line: usize, message: String) -> ArtifactError {
    ArtifactError::Format { line, message }
}
