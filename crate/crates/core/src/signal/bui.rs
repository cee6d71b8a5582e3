use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DroneType {
    Bebop,
    Ar,
    Phantom,
}

impl DroneType {
    pub const ALL: [DroneType; 3] = [DroneType::Bebop, DroneType::Ar, DroneType::Phantom];

    pub fn name(self) -> &'static str {
        match self {
            DroneType::Bebop => "Bebop",
            DroneType::Ar => "AR",
            DroneType::Phantom => "Phantom",
        }
    }

    fn code(self) -> &'static str {
        match self {
            DroneType::Bebop => "00",
            DroneType::Ar => "01",
            DroneType::Phantom => "10",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlightMode {
    OnConnected,
    Hovering,
    Flying,
    VideoRecording,
}

impl FlightMode {
    pub const ALL: [FlightMode; 4] = [
        FlightMode::OnConnected,
        FlightMode::Hovering,
        FlightMode::Flying,
        FlightMode::VideoRecording,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FlightMode::OnConnected => "On and connected",
            FlightMode::Hovering => "Hovering",
            FlightMode::Flying => "Flying",
            FlightMode::VideoRecording => "Video recording",
        }
    }

    fn code(self) -> &'static str {
        match self {
            FlightMode::OnConnected => "00",
            FlightMode::Hovering => "01",
            FlightMode::Flying => "10",
            FlightMode::VideoRecording => "11",
        }
    }
}

/// Two drone types transmitting at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DronePair {
    BebopAr,
    BebopPhantom,
    ArPhantom,
}

impl DronePair {
    pub const ALL: [DronePair; 3] = [DronePair::BebopAr, DronePair::BebopPhantom, DronePair::ArPhantom];

    pub fn types(self) -> (DroneType, DroneType) {
        match self {
            DronePair::BebopAr => (DroneType::Bebop, DroneType::Ar),
            DronePair::BebopPhantom => (DroneType::Bebop, DroneType::Phantom),
            DronePair::ArPhantom => (DroneType::Ar, DroneType::Phantom),
        }
    }

    pub fn from_types(a: DroneType, b: DroneType) -> Option<Self> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        DronePair::ALL.into_iter().find(|p| p.types() == (a, b))
    }

    pub fn name(self) -> &'static str {
        match self {
            DronePair::BebopAr => "Bebop & AR",
            DronePair::BebopPhantom => "Bebop & Phantom",
            DronePair::ArPhantom => "AR & Phantom",
        }
    }

    fn code(self) -> &'static str {
        match self {
            DronePair::BebopAr => "00",
            DronePair::BebopPhantom => "01",
            DronePair::ArPhantom => "10",
        }
    }
}

/// Five-digit binary unique identifier of a segment.
///
/// First digit: 0 no drone, 1 one drone, 2 two coexisting drones. Digits 2-3 encode
/// the drone type (or type pair), digits 4-5 the flight mode. Only the 13 codes of
/// the dataset table are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiLabel {
    NoDrone,
    Single(DroneType, FlightMode),
    /// Coexistence segments are always On-and-connected.
    Coexist(DronePair),
}

/// The 13 valid codes with their sample counts in the reference dataset.
pub const TABLE_I: [(BuiLabel, usize); 13] = [
    (BuiLabel::NoDrone, 41),
    (BuiLabel::Single(DroneType::Bebop, FlightMode::OnConnected), 21),
    (BuiLabel::Single(DroneType::Bebop, FlightMode::Hovering), 21),
    (BuiLabel::Single(DroneType::Bebop, FlightMode::Flying), 21),
    (BuiLabel::Single(DroneType::Bebop, FlightMode::VideoRecording), 21),
    (BuiLabel::Single(DroneType::Ar, FlightMode::OnConnected), 21),
    (BuiLabel::Single(DroneType::Ar, FlightMode::Hovering), 21),
    (BuiLabel::Single(DroneType::Ar, FlightMode::Flying), 21),
    (BuiLabel::Single(DroneType::Ar, FlightMode::VideoRecording), 18),
    (BuiLabel::Single(DroneType::Phantom, FlightMode::OnConnected), 21),
    (BuiLabel::Coexist(DronePair::BebopAr), 441),
    (BuiLabel::Coexist(DronePair::BebopPhantom), 441),
    (BuiLabel::Coexist(DronePair::ArPhantom), 441),
];

impl BuiLabel {
    pub fn all() -> impl Iterator<Item = BuiLabel> {
        TABLE_I.iter().map(|(b, _)| *b)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let invalid = |reason| Error::InvalidBui {
            code: text.to_string(),
            reason,
        };
        let bytes = text.as_bytes();
        if bytes.len() != 5 {
            return Err(invalid("expected exactly 5 digits"));
        }
        if !matches!(bytes[0], b'0'..=b'2') || bytes[1..].iter().any(|b| !matches!(b, b'0' | b'1')) {
            return Err(invalid("first digit must be 0-2, the rest 0 or 1"));
        }
        BuiLabel::all()
            .find(|b| b.code() == text)
            .ok_or_else(|| invalid("code not in the dataset table"))
    }

    pub fn code(&self) -> String {
        match self {
            BuiLabel::NoDrone => "00000".to_string(),
            BuiLabel::Single(t, m) => format!("1{}{}", t.code(), m.code()),
            BuiLabel::Coexist(p) => format!("2{}00", p.code()),
        }
    }

    pub fn is_drone_present(&self) -> bool {
        !matches!(self, BuiLabel::NoDrone)
    }

    pub fn is_raw(&self) -> bool {
        !matches!(self, BuiLabel::Coexist(_))
    }

    pub fn reference_count(&self) -> usize {
        TABLE_I.iter().find(|(b, _)| b == self).map_or(0, |(_, n)| *n)
    }

    pub fn description(&self) -> String {
        match self {
            BuiLabel::NoDrone => "No drone".to_string(),
            BuiLabel::Single(t, m) => format!("{} / {}", t.name(), m.name()),
            BuiLabel::Coexist(p) => format!("{} / {}", p.name(), FlightMode::OnConnected.name()),
        }
    }
}

impl fmt::Display for BuiLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for BuiLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiLabel::parse(s)
    }
}

impl Serialize for BuiLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for BuiLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BuiLabel::parse(&s).map_err(serde::de::Error::custom)
    }
}
