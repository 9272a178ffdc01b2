//! The 24 appliances under test in the measurement campaign.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Category {
    #[serde(rename = "SMPS")]
    Smps,
    #[serde(rename = "NON_SMPS")]
    NonSmps,
    /// Category not reported.
    #[serde(rename = "unknown")]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Lab,
    Home,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplianceCatalogEntry {
    pub name: &'static str,
    pub brand: &'static str,
    pub category: Category,
    /// One rating per operating mode.
    pub power_watts: Vec<f64>,
    pub locations: Vec<Location>,
}

use Category::*;
use Location::*;

const LAB_HOME: &[Location] = &[Lab, Home];

type Row = (
    &'static str,
    &'static str,
    Category,
    &'static [f64],
    &'static [Location],
);

#[rustfmt::skip]
const ROWS: [Row; 24] = [
    ("CFL1", "Crompton Greaves", Smps, &[18.0], LAB_HOME),
    ("CFL2", "Bajaj", Smps, &[15.0], LAB_HOME),
    ("CFL3", "Bajaj", Smps, &[15.0], LAB_HOME),
    ("CFL4", "Bajaj", Smps, &[5.0], LAB_HOME),
    ("LED Lamp-1", "Genre India", Smps, &[5.0], LAB_HOME),
    ("LED Lamp-2", "Unbranded", Smps, &[3.0], LAB_HOME),
    ("LED Lamp-3", "Crompton Greaves", Smps, &[0.5], LAB_HOME),
    ("Laptop Charger-1", "Dell", Smps, &[90.0], LAB_HOME),
    ("Laptop Charger-2", "HP", Smps, &[65.0], LAB_HOME),
    ("Phone Charger-1", "Samsung", Smps, &[5.0], LAB_HOME),
    ("Phone Charger-2", "Asus", Smps, &[7.0], LAB_HOME),
    ("Phone Charger-3", "LG", Smps, &[6.0], LAB_HOME),
    ("LCD Monitor", "HP P191", Smps, &[20.0], LAB_HOME),
    ("Printer", "HP P1007", Smps, &[5.0], LAB_HOME),
    ("Speakers", "Harman Kardon", Smps, &[24.0], LAB_HOME),
    ("Modem", "Asus Router", Smps, &[18.0], LAB_HOME),
    ("Induction Cooktop-1", "Philips", Smps, &[500.0, 1300.0], LAB_HOME),
    ("Induction Cooktop-2", "Maharaja Whiteline", Smps, &[600.0, 1000.0], LAB_HOME),
    ("Microwave", "Kenstar", Unknown, &[1250.0], &[Home]),
    ("Refrigerator", "LG", NonSmps, &[1020.0], &[Home]),
    ("Blender", "Inalsa", NonSmps, &[180.0], LAB_HOME),
    ("Iron", "Philips", NonSmps, &[535.0], &[Lab]),
    ("Room Heater", "North Star", NonSmps, &[1500.0], &[Lab]),
    ("Television", "LG", Smps, &[60.0], &[Home]),
];

pub fn catalog() -> Vec<ApplianceCatalogEntry> {
    ROWS.iter()
        .map(
            |(name, brand, category, power, locations)| ApplianceCatalogEntry {
                name,
                brand,
                category: *category,
                power_watts: power.to_vec(),
                locations: locations.to_vec(),
            },
        )
        .collect()
}

/// Looks an entry up by exact name.
pub fn catalog_entry(name: &str) -> Option<ApplianceCatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}
