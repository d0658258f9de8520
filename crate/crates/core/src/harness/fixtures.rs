use super::gridfile::{parse_grid_str, LoadedGrid};
use crate::error::{Error, Result};

/// Bundled grids shaped like common test feeders: the name gives load
/// buses and substations. Impedances are synthetic.
pub const FIXTURES: &[(&str, &str)] = &[
    ("bus_13_3", include_str!("../../fixtures/bus_13_3.json")),
    ("bus_29_1", include_str!("../../fixtures/bus_29_1.json")),
    ("bus_83_11", include_str!("../../fixtures/bus_83_11.json")),
    (
        "bus_13_3_x50",
        include_str!("../../fixtures/bus_13_3_x50.json"),
    ),
];

pub fn fixture_names() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(n, _)| *n)
}

pub fn load_fixture(name: &str) -> Result<LoadedGrid> {
    let (_, text) = FIXTURES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::Domain(format!(
            "unknown fixture '{name}' (known: {})",
            fixture_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    parse_grid_str(text)
}
