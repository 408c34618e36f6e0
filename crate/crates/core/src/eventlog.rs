//! CSV event files.
//!
//! ```text
//! # format_version: 1
//! # model: qm
//! # two_s: 1
//! # seed: 42
//! # events: 2
//! seq,theta_a_rad,theta_b_rad,outcome_a_2m,outcome_b_2m
//! 0,0,0.785398163397,1,-1
//! 1,0,0.785398163397,-1,-1
//! ```
//!
//! LF line endings, angles printed with 12 significant digits, rows in
//! ascending seq.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::estimators::AccumulatorState;
use crate::models::{EventRecord, ModelSpec, Outcome, Setting, SpinMagnitude};

pub const FORMAT_VERSION: u32 = 1;
pub const COLUMNS: &str = "seq,theta_a_rad,theta_b_rad,outcome_a_2m,outcome_b_2m";

#[derive(Debug, Clone, PartialEq)]
pub struct EventFileHeader {
    pub version: u32,
    pub model: ModelSpec,
    pub seed: u64,
    pub events: u64,
}

impl EventFileHeader {
    pub fn new(model: ModelSpec, seed: u64, events: u64) -> Self {
        EventFileHeader {
            version: FORMAT_VERSION,
            model,
            seed,
            events,
        }
    }

    pub fn spin(&self) -> SpinMagnitude {
        self.model.spin()
    }
}

/// `%.12g`-style formatting.
pub fn format_angle(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..DIGITS).contains(&exp) {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x))
    }
}

fn planar(setting: &Setting, seq: u64) -> Result<f64> {
    setting
        .planar_angle()
        .ok_or_else(|| Error::data(Some(seq), "setting is not in the x-y plane"))
}

/// Write `records` under `header`. The number written must equal
/// `header.events`.
pub fn write_events<W, I>(header: &EventFileHeader, records: I, dest: W) -> Result<u64>
where
    W: Write,
    I: IntoIterator<Item = EventRecord>,
{
    let mut out = std::io::BufWriter::new(dest);
    let spin = header.spin();
    write!(
        out,
        "# format_version: {}\n# model: {}\n# two_s: {}\n# seed: {}\n# events: {}\n{}\n",
        header.version,
        header.model.descriptor(),
        spin.two_s(),
        header.seed,
        header.events,
        COLUMNS
    )?;
    let mut count = 0u64;
    let mut last_seq: Option<u64> = None;
    for ev in records {
        ev.validate(spin)?;
        if last_seq.is_some_and(|s| ev.seq <= s) {
            return Err(Error::data(Some(ev.seq), "rows must be in ascending seq"));
        }
        last_seq = Some(ev.seq);
        writeln!(
            out,
            "{},{},{},{},{}",
            ev.seq,
            format_angle(planar(&ev.setting_a, ev.seq)?),
            format_angle(planar(&ev.setting_b, ev.seq)?),
            ev.outcome_a.two_m(),
            ev.outcome_b.two_m()
        )?;
        count += 1;
    }
    out.flush()?;
    if count != header.events {
        return Err(Error::data(
            None,
            format!("header declares {} events, wrote {count}", header.events),
        ));
    }
    Ok(count)
}

/// Streaming reader over an event file body.
pub struct EventReader<R> {
    header: EventFileHeader,
    source: R,
    line_no: usize,
    buf: String,
    read: u64,
    done: bool,
}

impl<R: BufRead> EventReader<R> {
    pub fn header(&self) -> &EventFileHeader {
        &self.header
    }

    fn parse_row(&self, line: &str) -> Result<EventRecord> {
        let spin = self.header.spin();
        let parse_err = |message: String| Error::Parse {
            line: self.line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(format!("expected 5 fields, found {}", fields.len())));
        }
        let seq: u64 = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("bad seq '{}'", fields[0])))?;
        let angle = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("bad angle '{s}'")))
        };
        let two_m = |s: &str| -> Result<i32> {
            s.parse()
                .map_err(|_| parse_err(format!("bad projection '{s}'")))
        };
        let (ta, tb) = (angle(fields[1])?, angle(fields[2])?);
        let (ma, mb) = (two_m(fields[3])?, two_m(fields[4])?);
        let outcome = |m: i32| {
            Outcome::new(m, spin).map_err(|_| {
                Error::data(
                    Some(seq),
                    format!("projection 2m = {m} is not on the lattice for S = {spin}"),
                )
            })
        };
        Ok(EventRecord {
            seq,
            setting_a: Setting::from_angle(ta),
            setting_b: Setting::from_angle(tb),
            outcome_a: outcome(ma)?,
            outcome_b: outcome(mb)?,
        })
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<EventRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.buf.clear();
            match self.source.read_line(&mut self.buf) {
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Ok(0) => {
                    self.done = true;
                    if self.read != self.header.events {
                        return Some(Err(Error::data(
                            None,
                            format!(
                                "header declares {} events, file has {}",
                                self.header.events, self.read
                            ),
                        )));
                    }
                    return None;
                }
                Ok(_) => {}
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = self.parse_row(line);
            match row {
                Ok(_) => self.read += 1,
                Err(_) => self.done = true,
            }
            return Some(row);
        }
    }
}

/// Parse the header block and return a reader positioned at the first row.
pub fn read_events<R: BufRead>(mut source: R) -> Result<EventReader<R>> {
    let mut fields: Vec<(String, String, usize)> = Vec::new();
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        if source.read_line(&mut buf)? == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "missing column header".into(),
            });
        }
        line_no += 1;
        let line = buf.trim_end_matches(['\n', '\r']);
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once(':') {
                fields.push((k.trim().to_string(), v.trim().to_string(), line_no));
            }
            continue;
        }
        if line != COLUMNS {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected column header '{COLUMNS}'"),
            });
        }
        break;
    }
    let get = |key: &str| -> Result<(&str, usize)> {
        fields
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("header field '{key}' missing"),
            })
    };
    fn num<T: std::str::FromStr>(key: &str, (v, line): (&str, usize)) -> Result<T> {
        v.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad value '{v}' for '{key}'"),
        })
    }
    let version: u32 = num("format_version", get("format_version")?)?;
    if version != FORMAT_VERSION {
        return Err(Error::Parse {
            line: get("format_version")?.1,
            message: format!("unsupported format version {version}"),
        });
    }
    let two_s: u32 = num("two_s", get("two_s")?)?;
    let (descriptor, model_line) = get("model")?;
    let model = ModelSpec::from_descriptor(descriptor, two_s).map_err(|e| Error::Parse {
        line: model_line,
        message: e.to_string(),
    })?;
    let header = EventFileHeader {
        version,
        model,
        seed: num("seed", get("seed")?)?,
        events: num("events", get("events")?)?,
    };
    Ok(EventReader {
        header,
        source,
        line_no,
        buf: String::new(),
        read: 0,
        done: false,
    })
}

/// One pass over a file into an accumulator. Every row must share the
/// first row's setting pair.
pub fn accumulate_file<R: BufRead>(source: R) -> Result<(EventFileHeader, AccumulatorState)> {
    let reader = read_events(source)?;
    let header = reader.header().clone();
    let mut acc = AccumulatorState::new(header.spin());
    for ev in reader {
        acc.push(&ev?)?;
    }
    Ok((header, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConditionalKind, Simulator};
    use std::f64::consts::PI;
    use std::io::Cursor;

    #[test]
    fn angle_formatting() {
        assert_eq!(format_angle(PI / 4.0), "0.785398163397");
        assert_eq!(format_angle(0.0), "0");
        assert_eq!(format_angle(PI), "3.14159265359");
        assert_eq!(format_angle(1.0), "1");
        assert_eq!(format_angle(PI / 2.0), "1.57079632679");
        assert_eq!(format_angle(1.5e-7), "1.5e-07");
        assert_eq!(format_angle(6.0), "6");
    }

    fn pair_file(records: &[(i32, i32)], theta_b: f64) -> Vec<u8> {
        let a = Setting::from_angle(0.0);
        let b = Setting::from_angle(theta_b);
        let evs = records.iter().enumerate().map(|(i, &(x, y))| EventRecord {
            seq: i as u64,
            setting_a: a,
            setting_b: b,
            outcome_a: Outcome::new(x, SpinMagnitude::HALF).unwrap(),
            outcome_b: Outcome::new(y, SpinMagnitude::HALF).unwrap(),
        });
        let header = EventFileHeader::new(ModelSpec::QmSingletHalf, 0, records.len() as u64);
        let mut out = Vec::new();
        write_events(&header, evs, &mut out).unwrap();
        out
    }

    #[test]
    fn empty_stream_writes_headers_only() {
        let bytes = pair_file(&[], 0.0);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.ends_with(&format!("{COLUMNS}\n")));
        assert!(!text.contains('\r'));
        let reader = read_events(Cursor::new(bytes)).unwrap();
        assert_eq!(reader.header().events, 0);
        assert_eq!(reader.count(), 0);
    }

    #[test]
    fn two_records_serialize_theta() {
        let bytes = pair_file(&[(1, -1), (-1, 1)], PI / 4.0);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\n0,0,0.785398163397,1,-1\n"));
        assert!(text.contains("\n1,0,0.785398163397,-1,1\n"));
    }

    #[test]
    fn accumulate_two_events() {
        let (_, acc) = accumulate_file(Cursor::new(pair_file(&[(1, -1), (-1, 1)], 0.0))).unwrap();
        assert_eq!(acc.n(), 2);
        assert_eq!(acc.sum_prod() * 4.0, -2.0);
    }

    #[test]
    fn mixed_settings_rejected() {
        let mut text = String::from_utf8(pair_file(&[(1, -1), (-1, 1)], 0.0)).unwrap();
        text = text.replace("\n1,0,0,", "\n1,0,0.5,");
        match accumulate_file(Cursor::new(text)) {
            Err(Error::Data { seq: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let text = String::from_utf8(pair_file(&[(1, -1), (-1, 1)], 0.0)).unwrap();
        let broken = text.replace("\n1,0,0,-1,1\n", "\n1,0,zero,-1,1\n");
        let errs: Vec<_> = read_events(Cursor::new(broken)).unwrap().collect();
        match errs.last().unwrap() {
            Err(Error::Parse { line: 8, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }

        let off_lattice = text.replace("\n1,0,0,-1,1\n", "\n1,0,0,-1,2\n");
        let last = read_events(Cursor::new(off_lattice)).unwrap().last().unwrap();
        assert!(matches!(last, Err(Error::Data { seq: Some(1), .. })));

        let short = text.replace("# events: 2", "# events: 3");
        let last = read_events(Cursor::new(short)).unwrap().last().unwrap();
        assert!(matches!(last, Err(Error::Data { seq: None, .. })));

        let bad_version = text.replace("format_version: 1", "format_version: 9");
        assert!(matches!(
            read_events(Cursor::new(bad_version)),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn writer_rejects_bad_records() {
        let sim = Simulator::planar(ModelSpec::QmSingletHalf, 0.3, 1).unwrap();
        let mut evs = sim.events(0..3);
        evs.swap(0, 1);
        let header = EventFileHeader::new(ModelSpec::QmSingletHalf, 1, 3);
        let err = write_events(&header, evs, Vec::new());
        assert!(matches!(err, Err(Error::Data { seq: Some(0), .. })));

        let short = EventFileHeader::new(ModelSpec::QmSingletHalf, 1, 5);
        assert!(write_events(&short, sim.events(0..3), Vec::new()).is_err());
    }

    #[test]
    fn roundtrip_is_a_fixed_point() {
        let model = ModelSpec::ConservationSpin {
            spin: SpinMagnitude::new(3).unwrap(),
            kind: ConditionalKind::Extremal,
        };
        let sim = Simulator::planar(model, 1.234, 5).unwrap();
        let evs = sim.events(0..1000);
        let header = EventFileHeader::new(model, 5, 1000);
        let mut first = Vec::new();
        write_events(&header, evs.clone(), &mut first).unwrap();
        let reader = read_events(Cursor::new(first.clone())).unwrap();
        assert_eq!(reader.header(), &header);
        let back: Vec<EventRecord> = reader.collect::<Result<_>>().unwrap();
        assert_eq!(back.len(), evs.len());
        for (x, y) in back.iter().zip(&evs) {
            assert_eq!((x.seq, x.outcome_a, x.outcome_b), (y.seq, y.outcome_a, y.outcome_b));
            assert!(x.setting_b.approx_eq(&y.setting_b, 1e-12));
        }
        let mut second = Vec::new();
        write_events(&header, back, &mut second).unwrap();
        assert_eq!(first, second);
    }
}
