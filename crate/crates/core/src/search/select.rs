use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::net::ExecutableNetwork;
use crate::proxy::{evaluate, ClipSet};

/// Top-1 plus top-5 validation accuracy, in `[0, 2]`.
pub fn fitness(net: &ExecutableNetwork, val: &ClipSet) -> Result<f64> {
    let k = net.config().head.num_classes;
    if k < 6 {
        return Err(Error::Config(format!("fitness needs at least 6 classes, got {k}")));
    }
    Ok(evaluate(net, val)?.fitness())
}

/// Index of the fittest member of a uniform `k`-subset. `fitness[i]` and
/// `order[i]` are the fitness and insertion rank of member `i`; ties go to the
/// earlier insertion.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], order: &[u64], k: usize, rng: &mut R) -> usize {
    assert!(!fitness.is_empty(), "tournament over an empty population");
    let k = k.clamp(1, fitness.len());
    index::sample(rng, fitness.len(), k)
        .into_iter()
        .max_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(order[b].cmp(&order[a])))
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_tournament_is_argmax() {
        let f = [0.3, 1.7, 0.9, 1.7];
        let order = [0, 1, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert_eq!(tournament_select(&f, &order, 4, &mut rng), 1);
        }
    }

    #[test]
    fn ties_prefer_earlier_insertion() {
        let f = [1.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(tournament_select(&f, &[5, 2], 2, &mut rng), 1);
    }

    #[test]
    fn single_entry_tournament_is_uniform() {
        let f = [0.0, 1.0, 2.0, 3.0];
        let order = [0, 1, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            counts[tournament_select(&f, &order, 1, &mut rng)] += 1;
        }
        assert!(counts.iter().all(|&c| (900..1100).contains(&c)), "{counts:?}");
    }
}
