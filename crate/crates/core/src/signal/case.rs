use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bui::{BuiLabel, DronePair, DroneType, FlightMode};
use crate::error::{Error, Result};

/// The five classification tasks over the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassificationCase {
    /// Drone present or not (raw dataset).
    #[serde(rename = "I")]
    I,
    /// None, Bebop, AR or Phantom (raw dataset).
    #[serde(rename = "II-A")]
    IIA,
    /// Which pair of drones coexists (extended dataset only).
    #[serde(rename = "II-B")]
    IIB,
    /// Union of II-A and II-B.
    #[serde(rename = "II-C")]
    IIC,
    /// None plus every (type, mode) pair of the raw dataset.
    #[serde(rename = "III")]
    III,
}

const SINGLE_ROWS: [(DroneType, FlightMode); 9] = [
    (DroneType::Bebop, FlightMode::OnConnected),
    (DroneType::Bebop, FlightMode::Hovering),
    (DroneType::Bebop, FlightMode::Flying),
    (DroneType::Bebop, FlightMode::VideoRecording),
    (DroneType::Ar, FlightMode::OnConnected),
    (DroneType::Ar, FlightMode::Hovering),
    (DroneType::Ar, FlightMode::Flying),
    (DroneType::Ar, FlightMode::VideoRecording),
    (DroneType::Phantom, FlightMode::OnConnected),
];

fn type_index(t: DroneType) -> usize {
    DroneType::ALL.iter().position(|&x| x == t).unwrap()
}

fn pair_index(p: DronePair) -> usize {
    DronePair::ALL.iter().position(|&x| x == p).unwrap()
}

impl ClassificationCase {
    pub const ALL: [ClassificationCase; 5] = [
        ClassificationCase::I,
        ClassificationCase::IIA,
        ClassificationCase::IIB,
        ClassificationCase::IIC,
        ClassificationCase::III,
    ];

    pub fn num_classes(self) -> usize {
        match self {
            ClassificationCase::I => 2,
            ClassificationCase::IIA => 4,
            ClassificationCase::IIB => 3,
            ClassificationCase::IIC => 7,
            ClassificationCase::III => 10,
        }
    }

    /// Class index of `bui` under this case, or `None` when the segment lies outside
    /// the case's universe (for example coexistence segments under Case III).
    pub fn class_of(self, bui: BuiLabel) -> Option<usize> {
        use BuiLabel::*;
        match (self, bui) {
            (ClassificationCase::I, NoDrone) => Some(0),
            (ClassificationCase::I, Single(..)) => Some(1),
            (ClassificationCase::IIA | ClassificationCase::IIC, NoDrone) => Some(0),
            (ClassificationCase::IIA | ClassificationCase::IIC, Single(t, _)) => Some(1 + type_index(t)),
            (ClassificationCase::IIB, Coexist(p)) => Some(pair_index(p)),
            (ClassificationCase::IIC, Coexist(p)) => Some(4 + pair_index(p)),
            (ClassificationCase::III, NoDrone) => Some(0),
            (ClassificationCase::III, Single(t, m)) => {
                SINGLE_ROWS.iter().position(|&r| r == (t, m)).map(|i| i + 1)
            }
            _ => None,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        let mut names = vec![String::new(); self.num_classes()];
        for bui in BuiLabel::all() {
            if let Some(c) = self.class_of(bui) {
                let name = match (self, bui) {
                    (ClassificationCase::I, BuiLabel::NoDrone) => "No drone".to_string(),
                    (ClassificationCase::I, _) => "Drone".to_string(),
                    (ClassificationCase::IIA | ClassificationCase::IIC, BuiLabel::Single(t, _)) => {
                        t.name().to_string()
                    }
                    (_, BuiLabel::Coexist(p)) => p.name().to_string(),
                    (_, b) => b.description(),
                };
                names[c] = name;
            }
        }
        names
    }

    pub fn label(self) -> &'static str {
        match self {
            ClassificationCase::I => "I",
            ClassificationCase::IIA => "II-A",
            ClassificationCase::IIB => "II-B",
            ClassificationCase::IIC => "II-C",
            ClassificationCase::III => "III",
        }
    }

    /// Whether the case draws on the coexistence (2xxxx) segments.
    pub fn uses_extended(self) -> bool {
        matches!(self, ClassificationCase::IIB | ClassificationCase::IIC)
    }
}

impl fmt::Display for ClassificationCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ClassificationCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['_', ' '], "-");
        ClassificationCase::ALL
            .into_iter()
            .find(|c| c.label() == norm || c.label().replace('-', "") == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown classification case {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn image_sizes_match_class_counts() {
        for case in ClassificationCase::ALL {
            let image: BTreeSet<usize> = BuiLabel::all().filter_map(|b| case.class_of(b)).collect();
            assert_eq!(image.len(), case.num_classes(), "{case}");
            assert_eq!(*image.iter().max().unwrap(), case.num_classes() - 1);
        }
    }

    #[test]
    fn examples() {
        let b = |s| BuiLabel::parse(s).unwrap();
        assert_eq!(ClassificationCase::I.class_of(b("10110")), Some(1));
        assert_eq!(ClassificationCase::IIC.class_of(b("20100")), Some(5));
        assert_eq!(ClassificationCase::IIC.class_names()[5], "Bebop & Phantom");
        assert_eq!(ClassificationCase::III.class_of(b("20000")), None);
        assert_eq!(ClassificationCase::IIB.class_of(b("00000")), None);
        assert_eq!(ClassificationCase::IIA.class_of(b("10111")), Some(2));
    }

    #[test]
    fn case_three_covers_exactly_the_raw_rows() {
        let included: Vec<BuiLabel> = BuiLabel::all()
            .filter(|&b| ClassificationCase::III.class_of(b).is_some())
            .collect();
        assert_eq!(included.len(), 10);
        assert!(included.iter().all(|b| b.is_raw()));
    }

    #[test]
    fn parses_labels() {
        assert_eq!("II-C".parse::<ClassificationCase>().unwrap(), ClassificationCase::IIC);
        assert_eq!("iib".parse::<ClassificationCase>().unwrap(), ClassificationCase::IIB);
        assert_eq!("III".parse::<ClassificationCase>().unwrap(), ClassificationCase::III);
        assert!("IV".parse::<ClassificationCase>().is_err());
    }
}
