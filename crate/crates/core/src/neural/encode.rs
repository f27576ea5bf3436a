use crate::instance::Instance;

pub const INPUT_CHANNELS: usize = 6;

/// Six-channel network input, stored channel-major as `[6][n][m]`.
///
/// Channel 0 holds the valuations. Channels 1..=5 hold the top-agent mask `X`
/// (each item's value kept only for the agent valuing it most) restricted to
/// items with `j mod 5 <= c - 1`, so the last channel is `X` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    agents: usize,
    items: usize,
    data: Vec<f64>,
}

impl InputTensor {
    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Channel `c` (0-based) as an `n x m` row-major slice.
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.agents * self.items;
        &self.data[c * plane..(c + 1) * plane]
    }
}

pub fn top_agent_mask(inst: &Instance) -> Vec<f64> {
    let (n, m) = (inst.agents(), inst.items());
    let mut x = vec![0.0; n * m];
    for j in 0..m {
        let i = inst.top_agent(j);
        x[i * m + j] = inst.value(i, j);
    }
    x
}

pub fn encode(inst: &Instance) -> InputTensor {
    let (n, m) = (inst.agents(), inst.items());
    let plane = n * m;
    let mut data = vec![0.0; INPUT_CHANNELS * plane];
    data[..plane].copy_from_slice(inst.values());
    let x = top_agent_mask(inst);
    for c in 1..INPUT_CHANNELS {
        let dst = &mut data[c * plane..(c + 1) * plane];
        for i in 0..n {
            for j in (0..m).filter(|j| j % 5 < c) {
                dst[i * m + j] = x[i * m + j];
            }
        }
    }
    InputTensor { agents: n, items: m, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{DistributionKind, DistributionSpec};

    #[test]
    fn hand_example() {
        let inst = Instance::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]);
        let t = encode(&inst);
        assert_eq!(t.channel(0), &[1.0, 2.0, 3.0, 1.0]);
        assert_eq!(t.channel(1), &[0.0, 0.0, 3.0, 0.0]);
        for c in 2..6 {
            assert_eq!(t.channel(c), &[0.0, 2.0, 3.0, 0.0]);
        }
    }

    #[test]
    fn single_item_channels_all_equal_mask() {
        let inst = Instance::from_rows(&[vec![0.2], vec![0.7], vec![0.1]]);
        let t = encode(&inst);
        for c in 1..6 {
            assert_eq!(t.channel(c), &[0.0, 0.7, 0.0]);
        }
    }

    #[test]
    fn channels_are_nested() {
        let spec = DistributionSpec::new(DistributionKind::UniformMixed, 3);
        for idx in 0..50 {
            let inst = spec.sample_at(4, 17, idx);
            let t = encode(&inst);
            assert_eq!(t.channel(0), inst.values());
            assert_eq!(t.channel(5), top_agent_mask(&inst).as_slice());
            for c in 1..5 {
                for (a, b) in t.channel(c).iter().zip(t.channel(c + 1)) {
                    assert!(*a == 0.0 || a == b);
                }
            }
            let x = t.channel(5);
            for j in 0..17 {
                let nonzero = (0..4).filter(|&i| x[i * 17 + j] != 0.0).count();
                assert_eq!(nonzero, 1);
            }
        }
    }
}
