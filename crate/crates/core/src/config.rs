//! Pipeline configuration and its flat `key = value` text form.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::change::ChangeConfig;
use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};
use crate::optim::{AdamConfig, Mode, NetWidths, RegistrationConfig};

macro_rules! pipeline_config {
    ($($(#[doc = $doc:literal])* $name:ident: $ty:ty = $default:expr,)*) => {
        /// Every tunable of the `pipeline` command.
        ///
        /// A config file may set any subset of the keys; omitted keys keep
        /// their defaults.
        #[derive(Debug, Clone, PartialEq)]
        pub struct PipelineConfig {
            $($(#[doc = $doc])* pub $name: $ty,)*
        }

        impl Default for PipelineConfig {
            fn default() -> Self {
                Self { $($name: $default,)* }
            }
        }

        impl PipelineConfig {
            /// All keys in file order.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($name),)*];

            fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($name) => self.$name = parse_value(key, value)?,)*
                    _ => return Err(Error::Config(format!("unknown key {key:?}"))),
                }
                Ok(())
            }

            /// Every key, one per line, in [`Self::KEYS`] order.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(out += &format!("{} = {}\n", stringify!($name), self.$name);)*
                out
            }
        }
    };
}

pipeline_config! {
    /// Number of RBF kernels; a perfect square.
    k_anchors: usize = 36,
    /// Squared-distance clamp of the registration loss, m^2.
    delta_reg: f64 = 10.0,
    lambda_reg: f64 = 0.01,
    tau_ss: u16 = 7,
    /// Clamp of the change response, m.
    delta_cd: f64 = 10.0,
    k_mean: usize = 7,
    /// Change threshold, m.
    tau_cd: f64 = 2.0,
    k_norm: usize = 16,
    ground_cell: f64 = 4.0,
    h_ground: f64 = 0.5,
    normal_tol_deg: f64 = 40.0,
    r_iso: f64 = 2.0,
    n_iso: usize = 5,
    r_pop: f64 = 1.0,
    mode: Mode = Mode::Direct,
    steps: usize = 5000,
    seed: u64 = 0,
    /// Source points fed to the network in network mode.
    n_net: usize = 512,
    lr: f64 = 5e-4,
    beta1: f64 = 0.9,
    beta2: f64 = 0.999,
    eps: f64 = 1e-8,
    grad_clip: f64 = 1e3,
    /// Register only points inside the other traversal's frustums.
    crop_to_overlap: bool = true,
    image_width: u32 = 1024,
    image_height: u32 = 768,
    /// Changed points farther than this from a camera are not projected, m.
    proj_range: f64 = 100.0,
    radius_px: u32 = 20,
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V>
where
    V::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

impl PipelineConfig {
    /// Parse `key = value` lines over the defaults. `#` starts a comment
    /// line; unknown and repeated keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", n + 1)));
            };
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: {key} set twice", n + 1)));
            }
            seen.push(key);
            config
                .set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, msg(e))))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {}", path.display(), msg(e))))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.change().validate()?;
        let side = (self.k_anchors as f64).sqrt().round() as usize;
        if self.k_anchors == 0 || side * side != self.k_anchors {
            return Err(Error::Config(format!("k_anchors = {} is not a positive perfect square", self.k_anchors)));
        }
        let positive = [
            ("delta_reg", self.delta_reg),
            ("lr", self.lr),
            ("eps", self.eps),
            ("grad_clip", self.grad_clip),
            ("proj_range", self.proj_range),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Config(format!("lambda_reg must be non-negative, got {}", self.lambda_reg)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        let counts = [
            ("steps", self.steps),
            ("n_net", self.n_net),
            ("image_width", self.image_width as usize),
            ("image_height", self.image_height as usize),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn registration(&self) -> RegistrationConfig {
        RegistrationConfig {
            k_anchors: self.k_anchors,
            lambda_reg: self.lambda_reg,
            delta_reg: self.delta_reg,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            grad_clip: self.grad_clip,
            n_net: self.n_net,
            widths: NetWidths::default(),
        }
    }

    pub fn change(&self) -> ChangeConfig {
        ChangeConfig {
            tau_ss: self.tau_ss,
            delta_cd: self.delta_cd,
            k_mean: self.k_mean,
            tau_cd: self.tau_cd,
            normal_tol_deg: self.normal_tol_deg,
            r_iso: self.r_iso,
            n_iso: self.n_iso,
            r_pop: self.r_pop,
            k_norm: self.k_norm,
            ground_cell: self.ground_cell,
            h_ground: self.h_ground,
        }
    }
}

/// Error text without the "configuration error: " prefix, for re-wrapping.
fn msg(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
