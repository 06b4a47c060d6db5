//! A generated network together with everything derived from it.

use crate::radio::{build_rate_table, classify_cen_cre, LogicalEnbIndex, Rsrp};
use crate::solver::JointProblem;
use crate::topology::{build_gain_tensor, generate_layout, GainTensor, Topology};
use crate::{Error, NetworkConfig, Result};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: NetworkConfig,
    pub topology: Topology,
    pub gains: GainTensor,
    pub index: LogicalEnbIndex,
    pub rsrp: Rsrp,
    pub problem: JointProblem,
}

impl Scenario {
    /// Drops the layout and channels for `config` and builds the rate tables.
    pub fn generate(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let topology = generate_layout(config)?;
        let gains = build_gain_tensor(&topology, config);
        Self::from_parts(config.clone(), topology, gains)
    }

    /// Rebuilds the derived quantities from a stored layout and gain tensor.
    pub fn from_parts(
        config: NetworkConfig,
        topology: Topology,
        gains: GainTensor,
    ) -> Result<Self> {
        if gains.num_ues() != topology.num_ues() || gains.num_enbs() != topology.num_enbs() {
            return Err(Error::invalid("gain tensor does not match the topology"));
        }
        if gains.num_rbs() != config.num_rbs {
            return Err(Error::invalid(format!(
                "gain tensor has {} RBs, configuration has {}",
                gains.num_rbs(),
                config.num_rbs
            )));
        }
        let index = LogicalEnbIndex::new(&topology);
        let rsrp = Rsrp::from_gains(&topology, &gains);
        let eligibility = classify_cen_cre(&rsrp, &topology, &index);
        let rates = build_rate_table(&gains, &topology, &index, config.noise_per_rb());
        let problem = JointProblem::new(rates, index.kinds(), eligibility, topology.weights())?;
        Ok(Scenario {
            config,
            topology,
            gains,
            index,
            rsrp,
            problem,
        })
    }

    pub fn rb_bandwidth(&self) -> f64 {
        self.config.rb_bandwidth()
    }
}
