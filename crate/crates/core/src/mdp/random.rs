use rand::seq::index::sample;
use rand::Rng;

use super::TabularMdp;

/// Random tabular MDP: every `(i, a)` row has `max(1, round(density · |S|))`
/// distinct successors with normalized uniform weights, and uniform `[0, 1]`
/// rewards.
pub fn random_mdp<R: Rng + ?Sized>(
    num_states: usize,
    num_actions: usize,
    density: f64,
    gamma: f64,
    rng: &mut R,
) -> TabularMdp {
    let support = ((density * num_states as f64).round() as usize).clamp(1, num_states);
    let mut rows = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states * num_actions {
        let mut next: Vec<usize> = sample(rng, num_states, support).into_vec();
        next.sort_unstable();
        let weights: Vec<f64> = next.iter().map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let head: f64 = probs[..support - 1].iter().sum();
        probs[support - 1] = 1.0 - head;
        rows.push(
            next.into_iter()
                .zip(probs)
                .map(|(j, p)| (j, p, rng.gen::<f64>()))
                .collect(),
        );
    }
    TabularMdp::from_rows(num_states, num_actions, gamma, rows)
        .expect("generated rows are structurally valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_mdp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(s, a, d) in &[(1, 1, 0.5), (10, 3, 0.3), (20, 4, 1.0), (7, 2, 0.0)] {
            let mdp = random_mdp(s, a, d, 0.9, &mut rng);
            assert_eq!(validate_mdp(&mdp), Ok(()));
        }
    }
}
