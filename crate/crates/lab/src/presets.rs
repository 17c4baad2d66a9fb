//! Built-in scenarios, compiled from the files in `presets/`.

use crate::config::ScenarioConfig;
use crate::error::{LabError, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("double_slit_b0", include_str!("../../../presets/double_slit_b0.cfg")),
    ("double_slit_bc", include_str!("../../../presets/double_slit_bc.cfg")),
    ("double_slit_be", include_str!("../../../presets/double_slit_be.cfg")),
    ("double_slit_be_2a", include_str!("../../../presets/double_slit_be_2a.cfg")),
    ("double_slit_methods", include_str!("../../../presets/double_slit_methods.cfg")),
    ("free_gaussian", include_str!("../../../presets/free_gaussian.cfg")),
    ("hydrogen_b0", include_str!("../../../presets/hydrogen_b0.cfg")),
    ("hydrogen_b3_1", include_str!("../../../presets/hydrogen_b3_1.cfg")),
    ("hydrogen_b3_5", include_str!("../../../presets/hydrogen_b3_5.cfg")),
    ("hydrogen_b9", include_str!("../../../presets/hydrogen_b9.cfg")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    let key = name.strip_suffix(".cfg").unwrap_or(name);
    let key = key.rsplit('/').next().unwrap_or(key);
    PRESETS.iter().find(|(n, _)| *n == key).map(|(_, t)| *t)
}

pub fn load(name: &str) -> Result<ScenarioConfig> {
    let t = text(name).ok_or_else(|| LabError::Config(format!("no preset named '{name}'")))?;
    ScenarioConfig::parse(t)
}
