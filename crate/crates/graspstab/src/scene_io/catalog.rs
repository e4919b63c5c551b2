//! The bundled object catalog: per-object size, mass, and hand-object
//! friction coefficient for the 22 reference objects A0..F6. Sizes are
//! stored in millimeters and masses in grams exactly as tabulated;
//! accessors convert to SI.

use std::collections::BTreeMap;

/// One catalog row. `size_mm` is the bounding-box extent of the object
/// mesh at rest; `friction` is the measured hand-object coefficient.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CatalogEntry {
    pub size_mm: [f64; 3],
    pub mass_g: f64,
    pub friction: f64,
}

impl CatalogEntry {
    pub fn mass_kg(&self) -> f64 {
        self.mass_g * 1e-3
    }

    pub fn size_m(&self) -> [f64; 3] {
        [self.size_mm[0] * 1e-3, self.size_mm[1] * 1e-3, self.size_mm[2] * 1e-3]
    }
}

/// Object id -> physical attributes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObjectCatalog {
    entries: BTreeMap<String, CatalogEntry>,
}

// (id, size mm, mass g, friction), verbatim from the published table.
// The A2 mass of 0.636 looks like a units slip in the source (all other
// rows are grams); it is stored verbatim and flagged as suspect on lookup.
const TABLE: [(&str, [f64; 3], f64, f64); 22] = [
    ("A0", [67.0, 67.0, 72.0], 5.1, 0.010),
    ("A1", [49.0, 49.0, 77.0], 46.7, 0.659),
    ("A2", [50.0, 50.0, 77.0], 0.636, 0.673),
    ("B0", [64.0, 28.0, 131.0], 123.9, 0.641),
    ("B1", [48.0, 48.0, 77.0], 37.5, 0.647),
    ("B2", [30.0, 30.0, 48.0], 18.3, 0.621),
    ("C0", [50.0, 50.0, 50.0], 87.1, 0.689),
    ("C1", [29.0, 29.0, 29.0], 18.9, 0.423),
    ("D0", [40.0, 40.0, 40.0], 3.0, 0.086),
    ("D1", [66.0, 66.0, 66.0], 56.2, 0.854),
    ("D2", [48.0, 48.0, 48.0], 44.8, 0.670),
    ("D3", [48.0, 48.0, 24.0], 23.4, 0.513),
    ("E0", [152.0, 152.0, 20.0], 95.8, 0.412),
    ("E1", [100.0, 100.0, 3.0], 13.7, 0.342),
    ("E2", [80.0, 80.0, 2.0], 6.4, 0.336),
    ("F0", [10.0, 10.0, 300.0], 10.9, 0.381),
    ("F1", [50.0, 50.0, 162.0], 39.8, 0.653),
    ("F2", [30.0, 58.0, 245.0], 67.8, 0.443),
    ("F3", [23.0, 23.0, 75.0], 414.2, 0.687),
    ("F4", [25.0, 25.0, 76.0], 37.1, 0.691),
    ("F5", [29.0, 29.0, 75.0], 27.2, 0.748),
    ("F6", [23.0, 23.0, 75.0], 15.9, 0.722),
];

/// Ids whose tabulated mass is likely a units slip in the source.
pub const SUSPECT_MASS_IDS: [&str; 1] = ["A2"];

/// All 22 bundled objects.
pub fn load_catalog() -> ObjectCatalog {
    ObjectCatalog {
        entries: TABLE
            .iter()
            .map(|(id, size_mm, mass_g, friction)| {
                (
                    id.to_string(),
                    CatalogEntry { size_mm: *size_mm, mass_g: *mass_g, friction: *friction },
                )
            })
            .collect(),
    }
}

impl ObjectCatalog {
    pub fn get(&self, id: &str) -> Option<&CatalogEntry> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_suspect_mass(&self, id: &str) -> bool {
        SUSPECT_MASS_IDS.contains(&id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_rows() {
        let cat = load_catalog();
        assert_eq!(cat.len(), 22);
        let a0 = cat.get("A0").unwrap();
        assert_eq!(a0.size_mm, [67.0, 67.0, 72.0]);
        assert_eq!(a0.mass_g, 5.1);
        assert_eq!(a0.friction, 0.010);
        assert_eq!(cat.get("C0").unwrap().mass_g, 87.1);
        assert_eq!(cat.get("C0").unwrap().friction, 0.689);
        assert_eq!(cat.get("F3").unwrap().mass_g, 414.2);
        assert!(cat.get("G1").is_none());
    }

    #[test]
    fn suspect_mass_flag() {
        let cat = load_catalog();
        assert!(cat.is_suspect_mass("A2"));
        assert!(!cat.is_suspect_mass("A1"));
        assert_eq!(cat.get("A2").unwrap().mass_g, 0.636);
    }

    #[test]
    fn ranges_are_physical() {
        let cat = load_catalog();
        for id in cat.ids() {
            let e = cat.get(id).unwrap();
            assert!(e.mass_g > 0.0);
            assert!(e.size_mm.iter().all(|&s| s > 0.0));
            assert!((0.0..=2.0).contains(&e.friction));
        }
    }

    #[test]
    fn si_conversion() {
        let cat = load_catalog();
        let c0 = cat.get("C0").unwrap();
        assert!((c0.mass_kg() - 0.0871).abs() < 1e-12);
        assert!((c0.size_m()[0] - 0.05).abs() < 1e-12);
    }
}
