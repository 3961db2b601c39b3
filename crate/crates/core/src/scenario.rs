//! Experiment parameters: operators, carriers, spectrum access modes and the
//! three antenna / transmit-power presets.
//!
//! A [`ScenarioConfig`] is built from a TOML document through [`RawConfig`],
//! which keeps every field optional so that defaults can be filled in and
//! explicit overrides can be checked against the selected preset.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Errors raised while building or validating a scenario.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },

    /// An explicit antenna or power value disagrees with the selected preset.
    #[error("`{field}` = {given} conflicts with preset {preset} (expects {expected})")]
    InconsistentPreset {
        field: String,
        preset: PowerConstraintPreset,
        expected: f64,
        given: f64,
    },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Which of the two carriers a BS operates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Carrier {
    Low,
    High,
}

impl Carrier {
    pub const ALL: [Carrier; 2] = [Carrier::Low, Carrier::High];

    pub fn index(self) -> usize {
        match self {
            Carrier::Low => 0,
            Carrier::High => 1,
        }
    }

    pub fn from_index(i: usize) -> Carrier {
        if i == 0 {
            Carrier::Low
        } else {
            Carrier::High
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Carrier::Low => "low",
            Carrier::High => "high",
        }
    }
}

impl fmt::Display for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Spectrum access mode of one carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    /// Each operator gets a disjoint `W_tot / M` slice.
    Exclusive,
    /// All operators transmit over the full `W_tot`.
    Pooled,
}

/// Log-distance path loss parameters `alpha + beta * 10 log10(d) + N(0, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossParams {
    pub alpha_db: f64,
    pub beta: f64,
    pub sigma_db: f64,
}

impl PathLossParams {
    pub const fn new(alpha_db: f64, beta: f64, sigma_db: f64) -> Self {
        Self {
            alpha_db,
            beta,
            sigma_db,
        }
    }

    /// Measured NYC parameters for the 28 and 73 GHz bands, `(los, nlos)`.
    pub fn measured(frequency_ghz: f64) -> Option<(PathLossParams, PathLossParams)> {
        if frequency_ghz == 28.0 {
            Some((Self::new(61.4, 2.0, 5.8), Self::new(72.0, 2.9, 8.7)))
        } else if frequency_ghz == 73.0 {
            Some((Self::new(69.8, 2.0, 5.8), Self::new(86.6, 2.45, 8.0)))
        } else {
            None
        }
    }
}

/// One of the two carriers of every BS.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierSpec {
    pub id: Carrier,
    pub frequency_ghz: f64,
    /// `W_tot`, Hz.
    pub total_bandwidth_hz: f64,
    pub mode: AccessMode,
    /// Conducted power over the per-operator bandwidth, dBm.
    pub bs_tx_power_dbm: f64,
    /// Square UPA element count at the BS.
    pub bs_elements: usize,
    /// Square UPA element count at the UE.
    pub ue_elements: usize,
    pub pathloss_los: PathLossParams,
    pub pathloss_nlos: PathLossParams,
}

impl CarrierSpec {
    /// Default spec for a carrier with the measured path loss tables.
    pub fn default_for(id: Carrier, mode: AccessMode) -> CarrierSpec {
        let frequency_ghz = match id {
            Carrier::Low => 28.0,
            Carrier::High => 73.0,
        };
        let (los, nlos) = PathLossParams::measured(frequency_ghz).expect("tabulated band");
        let ant = PowerConstraintPreset::ConfigII.antennas(id);
        CarrierSpec {
            id,
            frequency_ghz,
            total_bandwidth_hz: 1e9,
            mode,
            bs_tx_power_dbm: ant.bs_tx_power_dbm,
            bs_elements: ant.bs_elements,
            ue_elements: ant.ue_elements,
            pathloss_los: los,
            pathloss_nlos: nlos,
        }
    }

    /// Per-operator bandwidth `W^(c)`.
    pub fn per_operator_bandwidth(&self, operators: usize) -> f64 {
        per_operator_bandwidth(self, operators)
    }

    /// Conducted power plus boresight BS array gain.
    pub fn eirp_dbm(&self) -> f64 {
        self.bs_tx_power_dbm + 10.0 * (self.bs_elements as f64).log10()
    }

    fn validate(&self, path: &str) -> Result<(), ConfigError> {
        if !(self.frequency_ghz.is_finite() && self.frequency_ghz > 0.0) {
            return Err(invalid(format!("{path}.frequency_ghz"), "must be > 0"));
        }
        if !(self.total_bandwidth_hz.is_finite() && self.total_bandwidth_hz > 0.0) {
            return Err(invalid(format!("{path}.total_bandwidth_hz"), "must be > 0"));
        }
        if !self.bs_tx_power_dbm.is_finite() {
            return Err(invalid(format!("{path}.bs_tx_power_dbm"), "must be finite"));
        }
        for (name, n) in [("bs_elements", self.bs_elements), ("ue_elements", self.ue_elements)] {
            if square_side(n).is_none() {
                return Err(invalid(
                    format!("{path}.{name}"),
                    format!("{n} is not a perfect square >= 1"),
                ));
            }
        }
        for (name, pl) in [("pathloss_los", self.pathloss_los), ("pathloss_nlos", self.pathloss_nlos)] {
            if !(pl.alpha_db.is_finite() && pl.beta.is_finite() && pl.sigma_db.is_finite()) || pl.sigma_db < 0.0 {
                return Err(invalid(format!("{path}.{name}"), "needs finite alpha, beta and sigma >= 0"));
            }
        }
        Ok(())
    }
}

/// Side of a square array with `n` elements, if `n` is a perfect square.
pub fn square_side(n: usize) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

/// Per-operator bandwidth of a carrier: `W_tot / M` when exclusive, `W_tot` when pooled.
pub fn per_operator_bandwidth(spec: &CarrierSpec, operators: usize) -> f64 {
    match spec.mode {
        AccessMode::Exclusive => spec.total_bandwidth_hz / operators.max(1) as f64,
        AccessMode::Pooled => spec.total_bandwidth_hz,
    }
}

/// Antenna counts and conducted power for one carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPower {
    pub bs_elements: usize,
    pub ue_elements: usize,
    pub bs_tx_power_dbm: f64,
}

/// Antenna-size / power-limit presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerConstraintPreset {
    /// Same arrays on both bands, same EIRP.
    #[serde(rename = "i")]
    ConfigI,
    /// Doubled array side on the high band, EIRP equalized (about 48 dBm).
    #[serde(rename = "ii")]
    ConfigII,
    /// Doubled array side on the high band, same conducted power.
    #[serde(rename = "iii")]
    ConfigIII,
}

impl PowerConstraintPreset {
    pub fn antennas(self, carrier: Carrier) -> AntennaPower {
        let low = AntennaPower {
            bs_elements: 64,
            ue_elements: 16,
            bs_tx_power_dbm: 30.0,
        };
        match (self, carrier) {
            (_, Carrier::Low) | (PowerConstraintPreset::ConfigI, Carrier::High) => low,
            (PowerConstraintPreset::ConfigII, Carrier::High) => AntennaPower {
                bs_elements: 256,
                ue_elements: 64,
                bs_tx_power_dbm: 24.0,
            },
            (PowerConstraintPreset::ConfigIII, Carrier::High) => AntennaPower {
                bs_elements: 256,
                ue_elements: 64,
                bs_tx_power_dbm: 30.0,
            },
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" | "config-i" => Some(Self::ConfigI),
            "ii" | "2" | "config-ii" => Some(Self::ConfigII),
            "iii" | "3" | "config-iii" => Some(Self::ConfigIII),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ConfigI => "i",
            Self::ConfigII => "ii",
            Self::ConfigIII => "iii",
        }
    }
}

impl fmt::Display for PowerConstraintPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Greedy association variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssociationPolicy {
    /// Pick BS and carrier jointly.
    Joint,
    /// Keep the initial BS; pick only the carrier.
    CarrierOnly,
}

impl AssociationPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "joint" => Some(Self::Joint),
            "carrier-only" | "carrieronly" => Some(Self::CarrierOnly),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Joint => "joint",
            Self::CarrierOnly => "carrier-only",
        }
    }
}

/// How the initial serving BS is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialBsRule {
    /// Minimum path loss on the low carrier.
    LowCarrier,
    /// Minimum path loss over both carriers.
    MinOverCarriers,
}

/// Iterative association settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationParams {
    pub policy: AssociationPolicy,
    pub initial_bs: InitialBsRule,
    /// Iteration budget; `None` means `iterations_per_ue * total UEs`.
    pub max_iterations: Option<usize>,
    pub iterations_per_ue: usize,
    /// Sliding window length (steps) of the occupancy convergence test.
    pub window: usize,
    /// Converged when max - min of the low-carrier fraction inside the window is below this.
    pub tolerance: f64,
}

impl Default for AssociationParams {
    fn default() -> Self {
        Self {
            policy: AssociationPolicy::Joint,
            initial_bs: InitialBsRule::LowCarrier,
            max_iterations: None,
            iterations_per_ue: 20,
            window: 200,
            tolerance: 0.01,
        }
    }
}

/// Link state and cluster generation constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Outage slope `a_out`, 1/m.
    pub outage_a: f64,
    /// Outage offset `b_out`.
    pub outage_b: f64,
    /// LOS decay `a_LOS`, 1/m.
    pub los_a: f64,
    /// Mean of the Poisson cluster count (floored at one cluster).
    pub mean_clusters: f64,
    /// Deterministic power decay per cluster index, dB.
    pub power_decay_db: f64,
    /// Log-normal jitter of cluster powers, dB.
    pub power_jitter_db: f64,
    /// Elevations are uniform on `[-max_elevation_rad, max_elevation_rad]`.
    pub max_elevation_rad: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            outage_a: 0.0334,
            outage_b: 5.2,
            los_a: 0.0149,
            mean_clusters: 1.9,
            power_decay_db: 3.0,
            power_jitter_db: 4.0,
            max_elevation_rad: std::f64::consts::PI / 8.0,
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// `M`.
    pub operators: usize,
    pub area_km2: f64,
    /// BSs per km² per operator.
    pub bs_density: f64,
    /// UEs per km² per operator.
    pub ue_density: f64,
    /// `[low, high]`.
    pub carriers: [CarrierSpec; 2],
    /// `None` when antenna/power values are given explicitly.
    pub preset: Option<PowerConstraintPreset>,
    pub noise_figure_db: f64,
    pub thermal_noise_dbm_hz: f64,
    /// Probability that the initial carrier is the low one.
    pub initial_low_prob: f64,
    pub association: AssociationParams,
    pub channel: ChannelParams,
    pub rng_seed: u64,
    pub repetitions: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        build_scenario(&RawConfig::default()).expect("defaults are valid")
    }
}

impl ScenarioConfig {
    pub fn carrier(&self, c: Carrier) -> &CarrierSpec {
        &self.carriers[c.index()]
    }

    pub fn carrier_mut(&mut self, c: Carrier) -> &mut CarrierSpec {
        &mut self.carriers[c.index()]
    }

    /// Side of the square simulation region, meters.
    pub fn side_m(&self) -> f64 {
        (self.area_km2 * 1e6).sqrt()
    }

    pub fn bandwidth(&self, c: Carrier) -> f64 {
        per_operator_bandwidth(self.carrier(c), self.operators)
    }

    /// Noise power over the per-operator bandwidth, dBm.
    pub fn noise_dbm(&self, c: Carrier) -> f64 {
        self.thermal_noise_dbm_hz + 10.0 * self.bandwidth(c).log10() + self.noise_figure_db
    }

    pub fn initial_high_prob(&self) -> f64 {
        1.0 - self.initial_low_prob
    }

    /// Replace the antenna and power fields with the preset values.
    pub fn apply_preset(&mut self, preset: PowerConstraintPreset) {
        for c in Carrier::ALL {
            let ant = preset.antennas(c);
            let spec = self.carrier_mut(c);
            spec.bs_elements = ant.bs_elements;
            spec.ue_elements = ant.ue_elements;
            spec.bs_tx_power_dbm = ant.bs_tx_power_dbm;
        }
        self.preset = Some(preset);
    }

    /// Raw document with every field explicit.
    pub fn to_raw(&self) -> RawConfig {
        let carrier = |s: &CarrierSpec| RawCarrier {
            frequency_ghz: Some(s.frequency_ghz),
            total_bandwidth_hz: Some(s.total_bandwidth_hz),
            mode: Some(s.mode),
            bs_tx_power_dbm: Some(s.bs_tx_power_dbm),
            bs_elements: Some(s.bs_elements),
            ue_elements: Some(s.ue_elements),
            pathloss_los: Some(s.pathloss_los),
            pathloss_nlos: Some(s.pathloss_nlos),
        };
        let a = &self.association;
        let ch = &self.channel;
        RawConfig {
            operators: Some(self.operators),
            area_km2: Some(self.area_km2),
            bs_density: Some(self.bs_density),
            ue_density: Some(self.ue_density),
            preset: Some(self.preset.map(|p| p.name().to_string()).unwrap_or_else(|| "none".into())),
            noise_figure_db: Some(self.noise_figure_db),
            thermal_noise_dbm_hz: Some(self.thermal_noise_dbm_hz),
            initial_low_prob: Some(self.initial_low_prob),
            rng_seed: Some(self.rng_seed),
            repetitions: Some(self.repetitions),
            association: Some(RawAssociation {
                policy: Some(a.policy),
                initial_bs: Some(a.initial_bs),
                max_iterations: a.max_iterations,
                iterations_per_ue: Some(a.iterations_per_ue),
                window: Some(a.window),
                tolerance: Some(a.tolerance),
            }),
            channel: Some(RawChannel {
                outage_a: Some(ch.outage_a),
                outage_b: Some(ch.outage_b),
                los_a: Some(ch.los_a),
                mean_clusters: Some(ch.mean_clusters),
                power_decay_db: Some(ch.power_decay_db),
                power_jitter_db: Some(ch.power_jitter_db),
                max_elevation_rad: Some(ch.max_elevation_rad),
            }),
            carriers: Some(RawCarriers {
                low: Some(carrier(self.carrier(Carrier::Low))),
                high: Some(carrier(self.carrier(Carrier::High))),
            }),
            run: None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<ScenarioConfig, ConfigError> {
        build_scenario(&RawConfig::from_toml(text)?)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        build_scenario(&RawConfig::load(path)?)
    }

    /// Stable 64-bit digest of the canonical TOML form.
    pub fn fingerprint(&self) -> u64 {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.operators < 1 {
            return Err(invalid("operators", "must be >= 1"));
        }
        for (name, v) in [
            ("area_km2", self.area_km2),
            ("bs_density", self.bs_density),
            ("ue_density", self.ue_density),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("{v} must be > 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_low_prob) {
            return Err(invalid("initial_low_prob", "must lie in [0, 1]"));
        }
        if !self.noise_figure_db.is_finite() || !self.thermal_noise_dbm_hz.is_finite() {
            return Err(invalid("noise_figure_db", "noise parameters must be finite"));
        }
        if self.repetitions < 1 {
            return Err(invalid("repetitions", "must be >= 1"));
        }
        for c in Carrier::ALL {
            let spec = self.carrier(c);
            if spec.id != c {
                return Err(invalid(format!("carriers.{c}"), "carrier id out of place"));
            }
            spec.validate(&format!("carriers.{c}"))?;
        }
        if let Some(preset) = self.preset {
            check_preset(preset, &self.carriers)?;
        }
        let a = &self.association;
        if a.window < 1 {
            return Err(invalid("association.window", "must be >= 1"));
        }
        if !(a.tolerance.is_finite() && a.tolerance > 0.0) {
            return Err(invalid("association.tolerance", "must be > 0"));
        }
        if a.iterations_per_ue < 1 {
            return Err(invalid("association.iterations_per_ue", "must be >= 1"));
        }
        let ch = &self.channel;
        for (name, v) in [
            ("channel.outage_a", ch.outage_a),
            ("channel.los_a", ch.los_a),
            ("channel.mean_clusters", ch.mean_clusters),
            ("channel.power_decay_db", ch.power_decay_db),
            ("channel.power_jitter_db", ch.power_jitter_db),
            ("channel.max_elevation_rad", ch.max_elevation_rad),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("{v} must be finite and >= 0")));
            }
        }
        if !ch.outage_b.is_finite() {
            return Err(invalid("channel.outage_b", "must be finite"));
        }
        Ok(())
    }
}

fn check_preset(preset: PowerConstraintPreset, carriers: &[CarrierSpec; 2]) -> Result<(), ConfigError> {
    for spec in carriers {
        let ant = preset.antennas(spec.id);
        let c = spec.id;
        let checks = [
            ("bs_elements", ant.bs_elements as f64, spec.bs_elements as f64),
            ("ue_elements", ant.ue_elements as f64, spec.ue_elements as f64),
            ("bs_tx_power_dbm", ant.bs_tx_power_dbm, spec.bs_tx_power_dbm),
        ];
        for (name, expected, given) in checks {
            if expected != given {
                return Err(ConfigError::InconsistentPreset {
                    field: format!("carriers.{c}.{name}"),
                    preset,
                    expected,
                    given,
                });
            }
        }
    }
    Ok(())
}

/// Carrier pair of the hybrid scheme: exclusive low band, pooled high band.
pub fn hybrid_preset(operators: usize, low_bandwidth_hz: f64, high_bandwidth_hz: f64) -> [CarrierSpec; 2] {
    debug_assert!(operators >= 1);
    let mut low = CarrierSpec::default_for(Carrier::Low, AccessMode::Exclusive);
    low.total_bandwidth_hz = low_bandwidth_hz;
    let mut high = CarrierSpec::default_for(Carrier::High, AccessMode::Pooled);
    high.total_bandwidth_hz = high_bandwidth_hz;
    [low, high]
}

/// Spectrum access scheme compared by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessScheme {
    /// Exclusive low band, pooled high band.
    Hybrid,
    /// Both bands exclusive.
    Licensed,
    /// Both bands pooled.
    Pooled,
}

impl AccessScheme {
    pub const ALL: [AccessScheme; 3] = [AccessScheme::Hybrid, AccessScheme::Licensed, AccessScheme::Pooled];

    pub fn modes(self) -> [AccessMode; 2] {
        match self {
            AccessScheme::Hybrid => [AccessMode::Exclusive, AccessMode::Pooled],
            AccessScheme::Licensed => [AccessMode::Exclusive, AccessMode::Exclusive],
            AccessScheme::Pooled => [AccessMode::Pooled, AccessMode::Pooled],
        }
    }

    /// Copy of `cfg` with the carrier modes of this scheme.
    pub fn apply(self, cfg: &ScenarioConfig) -> ScenarioConfig {
        let mut out = cfg.clone();
        for (spec, mode) in out.carriers.iter_mut().zip(self.modes()) {
            spec.mode = mode;
        }
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            AccessScheme::Hybrid => "hybrid",
            AccessScheme::Licensed => "licensed",
            AccessScheme::Pooled => "pooled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hybrid" => Some(Self::Hybrid),
            "licensed" | "exclusive" => Some(Self::Licensed),
            "pooled" => Some(Self::Pooled),
            _ => None,
        }
    }
}

impl fmt::Display for AccessScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Raw document
// ---------------------------------------------------------------------------

/// Scenario document as written on disk; every field may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operators: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area_km2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ue_density: Option<f64>,
    /// `"i"`, `"ii"`, `"iii"` or `"none"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_figure_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thermal_noise_dbm_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_low_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub association: Option<RawAssociation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<RawChannel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carriers: Option<RawCarriers>,
    /// Run control; not part of the scenario itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RawRun>,
}

/// `[run]` table: defaults for command-line run controls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<AccessScheme>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_convergence: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAssociation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<AssociationPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_bs: Option<InitialBsRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations_per_ue: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawChannel {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outage_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outage_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub los_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_clusters: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_decay_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_jitter_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_elevation_rad: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCarriers {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low: Option<RawCarrier>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub high: Option<RawCarrier>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCarrier {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<AccessMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_tx_power_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ue_elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pathloss_los: Option<PathLossParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pathloss_nlos: Option<PathLossParams>,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<RawConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RawConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn carrier_mut(&mut self, c: Carrier) -> &mut RawCarrier {
        let carriers = self.carriers.get_or_insert_with(Default::default);
        let slot = match c {
            Carrier::Low => &mut carriers.low,
            Carrier::High => &mut carriers.high,
        };
        slot.get_or_insert_with(Default::default)
    }

    pub fn association_mut(&mut self) -> &mut RawAssociation {
        self.association.get_or_insert_with(Default::default)
    }

    /// Select a preset and drop explicit antenna/power values so they follow it.
    pub fn set_preset(&mut self, preset: PowerConstraintPreset) {
        self.preset = Some(preset.name().to_string());
        for c in Carrier::ALL {
            let rc = self.carrier_mut(c);
            rc.bs_elements = None;
            rc.ue_elements = None;
            rc.bs_tx_power_dbm = None;
        }
    }
}

fn build_carrier(
    id: Carrier,
    raw: Option<&RawCarrier>,
    preset: Option<PowerConstraintPreset>,
) -> Result<CarrierSpec, ConfigError> {
    let empty = RawCarrier::default();
    let raw = raw.unwrap_or(&empty);
    let path = format!("carriers.{id}");
    let default_mode = match id {
        Carrier::Low => AccessMode::Exclusive,
        Carrier::High => AccessMode::Pooled,
    };
    let default_freq = match id {
        Carrier::Low => 28.0,
        Carrier::High => 73.0,
    };
    let frequency_ghz = raw.frequency_ghz.unwrap_or(default_freq);
    let measured = PathLossParams::measured(frequency_ghz);
    let pathloss_los = raw
        .pathloss_los
        .or(measured.map(|m| m.0))
        .ok_or_else(|| ConfigError::MissingField(format!("{path}.pathloss_los")))?;
    let pathloss_nlos = raw
        .pathloss_nlos
        .or(measured.map(|m| m.1))
        .ok_or_else(|| ConfigError::MissingField(format!("{path}.pathloss_nlos")))?;
    let ant = preset.map(|p| p.antennas(id));
    let pick_usize = |v: Option<usize>, from_preset: Option<usize>, name: &str| {
        v.or(from_preset)
            .ok_or_else(|| ConfigError::MissingField(format!("{path}.{name}")))
    };
    let bs_elements = pick_usize(raw.bs_elements, ant.map(|a| a.bs_elements), "bs_elements")?;
    let ue_elements = pick_usize(raw.ue_elements, ant.map(|a| a.ue_elements), "ue_elements")?;
    let bs_tx_power_dbm = raw
        .bs_tx_power_dbm
        .or(ant.map(|a| a.bs_tx_power_dbm))
        .ok_or_else(|| ConfigError::MissingField(format!("{path}.bs_tx_power_dbm")))?;
    Ok(CarrierSpec {
        id,
        frequency_ghz,
        total_bandwidth_hz: raw.total_bandwidth_hz.unwrap_or(1e9),
        mode: raw.mode.unwrap_or(default_mode),
        bs_tx_power_dbm,
        bs_elements,
        ue_elements,
        pathloss_los,
        pathloss_nlos,
    })
}

/// Build and validate a scenario from a raw document, filling defaults and
/// expanding the preset into the carrier antenna/power fields.
pub fn build_scenario(raw: &RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let preset = match raw.preset.as_deref() {
        None => Some(PowerConstraintPreset::ConfigII),
        Some(s) if s.eq_ignore_ascii_case("none") => None,
        Some(s) => Some(
            PowerConstraintPreset::parse(s)
                .ok_or_else(|| invalid("preset", format!("unknown preset `{s}` (use i, ii, iii or none)")))?,
        ),
    };
    let carriers_raw = raw.carriers.as_ref();
    let low = build_carrier(Carrier::Low, carriers_raw.and_then(|c| c.low.as_ref()), preset)?;
    let high = build_carrier(Carrier::High, carriers_raw.and_then(|c| c.high.as_ref()), preset)?;

    let ra = raw.association.clone().unwrap_or_default();
    let da = AssociationParams::default();
    let association = AssociationParams {
        policy: ra.policy.unwrap_or(da.policy),
        initial_bs: ra.initial_bs.unwrap_or(da.initial_bs),
        max_iterations: ra.max_iterations,
        iterations_per_ue: ra.iterations_per_ue.unwrap_or(da.iterations_per_ue),
        window: ra.window.unwrap_or(da.window),
        tolerance: ra.tolerance.unwrap_or(da.tolerance),
    };
    let rc = raw.channel.clone().unwrap_or_default();
    let dc = ChannelParams::default();
    let channel = ChannelParams {
        outage_a: rc.outage_a.unwrap_or(dc.outage_a),
        outage_b: rc.outage_b.unwrap_or(dc.outage_b),
        los_a: rc.los_a.unwrap_or(dc.los_a),
        mean_clusters: rc.mean_clusters.unwrap_or(dc.mean_clusters),
        power_decay_db: rc.power_decay_db.unwrap_or(dc.power_decay_db),
        power_jitter_db: rc.power_jitter_db.unwrap_or(dc.power_jitter_db),
        max_elevation_rad: rc.max_elevation_rad.unwrap_or(dc.max_elevation_rad),
    };

    let cfg = ScenarioConfig {
        operators: raw.operators.unwrap_or(4),
        area_km2: raw.area_km2.unwrap_or(0.3),
        bs_density: raw.bs_density.unwrap_or(30.0),
        ue_density: raw.ue_density.unwrap_or(300.0),
        carriers: [low, high],
        preset,
        noise_figure_db: raw.noise_figure_db.unwrap_or(7.0),
        thermal_noise_dbm_hz: raw.thermal_noise_dbm_hz.unwrap_or(-174.0),
        initial_low_prob: raw.initial_low_prob.unwrap_or(0.5),
        association,
        channel,
        rng_seed: raw.rng_seed.unwrap_or(1),
        repetitions: raw.repetitions.unwrap_or(20),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mode: AccessMode) -> CarrierSpec {
        CarrierSpec::default_for(Carrier::Low, mode)
    }

    #[test]
    fn per_operator_bandwidth_examples() {
        assert_eq!(per_operator_bandwidth(&spec(AccessMode::Exclusive), 4), 250e6);
        assert_eq!(per_operator_bandwidth(&spec(AccessMode::Pooled), 4), 1e9);
        assert_eq!(per_operator_bandwidth(&spec(AccessMode::Exclusive), 1), 1e9);
        for m in 1..10 {
            let ex = per_operator_bandwidth(&spec(AccessMode::Exclusive), m);
            assert!((ex * m as f64 - per_operator_bandwidth(&spec(AccessMode::Pooled), m)).abs() < 1e-3);
        }
    }

    #[test]
    fn defaults_follow_table_iv() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.operators, 4);
        assert_eq!(cfg.area_km2, 0.3);
        assert_eq!(cfg.bs_density, 30.0);
        assert_eq!(cfg.ue_density, 300.0);
        assert_eq!(cfg.noise_figure_db, 7.0);
        assert_eq!(cfg.thermal_noise_dbm_hz, -174.0);
        assert_eq!(cfg.initial_low_prob, 0.5);
        for c in Carrier::ALL {
            assert_eq!(cfg.carrier(c).total_bandwidth_hz, 1e9);
        }
        let low = cfg.carrier(Carrier::Low);
        assert_eq!((low.pathloss_los, low.pathloss_nlos), (PathLossParams::new(61.4, 2.0, 5.8), PathLossParams::new(72.0, 2.9, 8.7)));
        let high = cfg.carrier(Carrier::High);
        assert_eq!((high.pathloss_los, high.pathloss_nlos), (PathLossParams::new(69.8, 2.0, 5.8), PathLossParams::new(86.6, 2.45, 8.0)));
    }

    #[test]
    fn preset_ii_expands_high_band() {
        let cfg = ScenarioConfig::from_toml("preset = \"ii\"").unwrap();
        let high = cfg.carrier(Carrier::High);
        assert_eq!(high.bs_elements, 256);
        assert_eq!(high.ue_elements, 64);
        assert_eq!(high.bs_tx_power_dbm, 24.0);
    }

    #[test]
    fn preset_table() {
        use PowerConstraintPreset::*;
        let row = |p: PowerConstraintPreset, c| {
            let a = p.antennas(c);
            (a.bs_elements, a.ue_elements, a.bs_tx_power_dbm)
        };
        assert_eq!(row(ConfigI, Carrier::Low), (64, 16, 30.0));
        assert_eq!(row(ConfigI, Carrier::High), (64, 16, 30.0));
        assert_eq!(row(ConfigII, Carrier::Low), (64, 16, 30.0));
        assert_eq!(row(ConfigII, Carrier::High), (256, 64, 24.0));
        assert_eq!(row(ConfigIII, Carrier::Low), (64, 16, 30.0));
        assert_eq!(row(ConfigIII, Carrier::High), (256, 64, 30.0));
    }

    #[test]
    fn config_ii_eirp_is_balanced() {
        let cfg = ScenarioConfig::default();
        let lo = cfg.carrier(Carrier::Low).eirp_dbm();
        let hi = cfg.carrier(Carrier::High).eirp_dbm();
        assert!((lo - hi).abs() < 0.1, "{lo} vs {hi}");
        assert!((lo - 48.0618).abs() < 1e-3);
        // iii keeps the conducted power, so the high band gains 6 dB of EIRP
        let mut iii = cfg.clone();
        iii.apply_preset(PowerConstraintPreset::ConfigIII);
        let gap = iii.carrier(Carrier::High).eirp_dbm() - iii.carrier(Carrier::Low).eirp_dbm();
        assert!((gap - 6.02).abs() < 0.01);
    }

    #[test]
    fn single_operator_exclusive_uses_full_band() {
        let cfg = ScenarioConfig::from_toml("operators = 1\n[carriers.low]\nmode = \"exclusive\"\n").unwrap();
        assert_eq!(cfg.bandwidth(Carrier::Low), 1e9);
    }

    #[test]
    fn zero_bs_density_is_rejected() {
        let err = ScenarioConfig::from_toml("bs_density = 0.0").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { ref field, .. } if field == "bs_density"), "{err}");
    }

    #[test]
    fn explicit_override_conflicting_with_preset_is_an_error() {
        let err = ScenarioConfig::from_toml("preset = \"ii\"\n[carriers.high]\nbs_elements = 64\n").unwrap_err();
        assert!(matches!(err, ConfigError::InconsistentPreset { .. }), "{err}");
        // agreeing values are fine
        ScenarioConfig::from_toml("preset = \"ii\"\n[carriers.high]\nbs_elements = 256\n").unwrap();
    }

    #[test]
    fn custom_arrays_need_every_field() {
        let err = ScenarioConfig::from_toml("preset = \"none\"").unwrap_err();
        assert!(matches!(err, ConfigError::MissingField(_)), "{err}");
        let err = ScenarioConfig::from_toml("[carriers.high]\nfrequency_ghz = 60.0\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingField(ref f) if f == "carriers.high.pathloss_los"), "{err}");
        let err = ScenarioConfig::from_toml(
            "preset = \"none\"\n[carriers.low]\nbs_elements = 10\nue_elements = 16\nbs_tx_power_dbm = 30.0\n\
             [carriers.high]\nbs_elements = 16\nue_elements = 16\nbs_tx_power_dbm = 30.0\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { ref field, .. } if field == "carriers.low.bs_elements"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ScenarioConfig::from_toml("operatrs = 3"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn toml_round_trip_and_idempotent_expansion() {
        let mut cfg = ScenarioConfig::default();
        cfg.association.max_iterations = Some(1234);
        cfg.rng_seed = u64::MAX - 3;
        cfg.apply_preset(PowerConstraintPreset::ConfigIII);
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.fingerprint(), again.fingerprint());
        let twice = ScenarioConfig::from_toml(&again.to_toml()).unwrap();
        assert_eq!(again, twice);
    }

    #[test]
    fn hybrid_preset_modes() {
        let [low, high] = hybrid_preset(4, 1e9, 1e9);
        assert_eq!((low.frequency_ghz, low.mode), (28.0, AccessMode::Exclusive));
        assert_eq!((high.frequency_ghz, high.mode), (73.0, AccessMode::Pooled));
        assert_eq!(low.per_operator_bandwidth(4), 250e6);
        assert_eq!(high.per_operator_bandwidth(4), 1e9);
    }

    #[test]
    fn baselines_force_both_modes() {
        let cfg = ScenarioConfig::default();
        let lic = AccessScheme::Licensed.apply(&cfg);
        assert_eq!(lic.bandwidth(Carrier::Low), 250e6);
        assert_eq!(lic.bandwidth(Carrier::High), 250e6);
        let pool = AccessScheme::Pooled.apply(&cfg);
        assert_eq!(pool.bandwidth(Carrier::Low), 1e9);
        assert_eq!(pool.bandwidth(Carrier::High), 1e9);
        let hyb = AccessScheme::Hybrid.apply(&pool);
        assert_eq!(hyb.carriers, hybrid_preset(4, 1e9, 1e9));
    }

    #[test]
    fn noise_power_uses_per_operator_band() {
        let cfg = ScenarioConfig::default();
        // -174 + 10 log10(250e6) + 7
        assert!((cfg.noise_dbm(Carrier::Low) - (-174.0 + 83.9794 + 7.0)).abs() < 1e-3);
        assert!((cfg.noise_dbm(Carrier::High) - (-174.0 + 90.0 + 7.0)).abs() < 1e-9);
    }
}
