use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Sigmoid,
    Sin,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Sin => z.sin(),
        }
    }

    /// Derivative given the pre-activation `z` and output `y`.
    #[inline]
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Sin => z.cos(),
        }
    }
}

/// Dense network: activation on hidden layers, linear output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Input size first, output size last.
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Self {
        Self {
            layer_sizes,
            activation,
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Spec(format!("{what} needs at least 2 layer sizes")));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Spec(format!("{what} has a zero-width layer")));
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// One branch/trunk pair with shared hidden layers; the last layer is cut
    /// into `n_outputs` groups, one per output function.
    Split,
    /// `n_outputs` complete branch/trunk pairs, one per output function.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepONetSpec {
    pub branch: MlpSpec,
    pub trunk: MlpSpec,
    pub n_outputs: usize,
    pub strategy: Strategy,
}

impl DeepONetSpec {
    pub fn validate(&self) -> Result<()> {
        self.branch.validate("branch")?;
        self.trunk.validate("trunk")?;
        if self.n_outputs == 0 {
            return Err(Error::Spec("n_outputs must be at least 1".into()));
        }
        let (bw, tw) = (self.branch.output_size(), self.trunk.output_size());
        if bw != tw {
            return Err(Error::Spec(format!(
                "branch output width {bw} differs from trunk output width {tw}"
            )));
        }
        if self.strategy == Strategy::Split && bw % self.n_outputs != 0 {
            return Err(Error::Spec(format!(
                "split strategy: output width {bw} is not divisible by {} outputs",
                self.n_outputs
            )));
        }
        Ok(())
    }

    /// Branch/trunk pairs in the model.
    pub fn n_members(&self) -> usize {
        match self.strategy {
            Strategy::Split => 1,
            Strategy::Independent => self.n_outputs,
        }
    }

    /// Output functions produced by each member.
    pub fn outputs_per_member(&self) -> usize {
        match self.strategy {
            Strategy::Split => self.n_outputs,
            Strategy::Independent => 1,
        }
    }

    pub fn width(&self) -> usize {
        self.branch.output_size()
    }

    pub fn group_width(&self) -> usize {
        self.width() / self.outputs_per_member()
    }

    /// Six 48-wide layers per net, output cut into three groups of 16.
    pub fn split_2d() -> Self {
        Self::uniform(21, 2, 48, 6, 3, Strategy::Split, Activation::Tanh)
    }

    /// Three independent nets, six 75-wide layers each.
    pub fn independent_2d() -> Self {
        Self::uniform(21, 2, 75, 6, 3, Strategy::Independent, Activation::Tanh)
    }

    /// Branch `[sensors, width × layers]`, trunk `[coords, width × layers]`.
    pub fn uniform(
        sensors: usize,
        coords: usize,
        width: usize,
        layers: usize,
        n_outputs: usize,
        strategy: Strategy,
        activation: Activation,
    ) -> Self {
        let mut b = vec![sensors];
        let mut t = vec![coords];
        b.extend(std::iter::repeat_n(width, layers));
        t.extend(std::iter::repeat_n(width, layers));
        Self {
            branch: MlpSpec::new(b, activation),
            trunk: MlpSpec::new(t, activation),
            n_outputs,
            strategy,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "split-2d" => Ok(Self::split_2d()),
            "independent-2d" => Ok(Self::independent_2d()),
            other => Err(Error::Spec(format!("unknown network preset {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        let s = DeepONetSpec::split_2d();
        s.validate().unwrap();
        assert_eq!(s.branch.layer_sizes, vec![21, 48, 48, 48, 48, 48, 48]);
        assert_eq!(s.trunk.layer_sizes, vec![2, 48, 48, 48, 48, 48, 48]);
        assert_eq!(s.group_width(), 16);
        let i = DeepONetSpec::independent_2d();
        i.validate().unwrap();
        assert_eq!(i.n_members(), 3);
        assert_eq!(i.group_width(), 75);
        assert!(DeepONetSpec::preset("nope").is_err());
    }

    #[test]
    fn divisibility_enforced() {
        let s = DeepONetSpec::uniform(21, 2, 50, 3, 3, Strategy::Split, Activation::Tanh);
        assert!(s.validate().is_err());
        let s = DeepONetSpec::uniform(21, 2, 50, 3, 3, Strategy::Independent, Activation::Tanh);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn width_mismatch_and_short_nets() {
        let mut s = DeepONetSpec::split_2d();
        s.trunk.layer_sizes = vec![2, 47];
        assert!(s.validate().is_err());
        s.trunk.layer_sizes = vec![2];
        assert!(s.validate().is_err());
    }
}
