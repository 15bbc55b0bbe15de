//! Serialisation helpers: every float is written with 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::classify::ExtremalType;
use crate::dynamics::Trajectory;
use crate::extremal::{MpReport, VerifiedExtremal};

/// Round-trip float text, `{:.16e}`, or empty for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, FullPrecision);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalRecord<'a> {
    #[serde(rename = "type")]
    pub kind: Option<ExtremalType>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
    pub alpha: f64,
    pub switch_times: &'a [f64],
    #[serde(rename = "s_T")]
    pub s_t: f64,
    pub residual_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admitted: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mp_report: Option<&'a MpReport>,
    pub trajectory: &'a Trajectory,
}

impl<'a> ExtremalRecord<'a> {
    pub fn from_verified(v: &'a VerifiedExtremal) -> Self {
        ExtremalRecord {
            kind: Some(v.extremal.kind),
            note: None,
            alpha: v.extremal.alpha,
            switch_times: &v.extremal.switch_times,
            s_t: v.s_t,
            residual_norm: v.extremal.residual_norm,
            regime: v.regime.map(|r| r.to_string()),
            candidates: v.candidates.as_deref(),
            admitted: Some(v.admitted),
            mp_report: Some(&v.mp_report),
            trajectory: &v.extremal.traj,
        }
    }

    pub fn full_thrust(traj: &'a Trajectory) -> Self {
        ExtremalRecord {
            kind: None,
            note: Some("full thrust"),
            alpha: 0.0,
            switch_times: &[],
            s_t: traj.final_position(),
            residual_norm: 0.0,
            regime: None,
            candidates: None,
            admitted: None,
            mp_report: None,
            trajectory: traj,
        }
    }
}
