//! Half-class and teacher-vaccination scenario transforms.

use rand::seq::index::sample;
use rand::Rng;

use super::ScenarioError;
use crate::trajectory::{Observation, Person, Role};

/// Roster indices (ascending) of a half class: `⌈children/2⌉` children and
/// one teacher, sampled uniformly. `must_include` forces one member in,
/// taking one of the sampled slots of its role.
pub fn half_class_members<R: Rng + ?Sized>(
    roster: &[Person],
    rng: &mut R,
    must_include: Option<usize>,
) -> Result<Vec<usize>, ScenarioError> {
    let children: Vec<usize> = (0..roster.len()).filter(|&i| roster[i].role == Role::Child).collect();
    let teachers: Vec<usize> = (0..roster.len()).filter(|&i| roster[i].role == Role::Teacher).collect();
    if teachers.is_empty() {
        return Err(ScenarioError::NoTeacher);
    }

    let mut pick = |pool: &[usize], k: usize| -> Vec<usize> {
        let (forced, rest): (Vec<usize>, Vec<usize>) = pool.iter().partition(|&&i| Some(i) == must_include);
        let k = k - forced.len().min(k);
        let mut out = forced;
        out.extend(sample(rng, rest.len(), k.min(rest.len())).into_iter().map(|s| rest[s]));
        out
    };
    let mut keep = pick(&children, children.len().div_ceil(2));
    keep.extend(pick(&teachers, 1));
    keep.sort_unstable();
    Ok(keep)
}

/// Half-class observation with a uniformly sampled subset.
pub fn apply_half_class<R: Rng + ?Sized>(obs: &Observation, rng: &mut R) -> Result<Observation, ScenarioError> {
    let keep = half_class_members(&obs.roster, rng, None)?;
    Ok(obs.subset(&keep))
}

/// Immunity flags: each teacher independently immune with probability
/// `efficacy`; children never.
pub fn apply_vaccination<R: Rng + ?Sized>(roster: &[Person], efficacy: f64, rng: &mut R) -> Vec<bool> {
    roster
        .iter()
        .map(|p| p.role == Role::Teacher && rng.random_bool(efficacy))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::SimRng;
    use rand::SeedableRng;

    fn roster(children: usize, teachers: usize) -> Vec<Person> {
        (0..children)
            .map(|i| Person::new(format!("c{i}"), Role::Child))
            .chain((0..teachers).map(|i| Person::new(format!("t{i}"), Role::Teacher)))
            .collect()
    }

    fn count(r: &[Person], keep: &[usize], role: Role) -> usize {
        keep.iter().filter(|&&i| r[i].role == role).count()
    }

    #[test]
    fn eighteen_children_three_teachers() {
        let r = roster(18, 3);
        let keep = half_class_members(&r, &mut SimRng::seed_from_u64(1), None).unwrap();
        assert_eq!(count(&r, &keep, Role::Child), 9);
        assert_eq!(count(&r, &keep, Role::Teacher), 1);
    }

    #[test]
    fn odd_rounds_up() {
        let r = roster(11, 1);
        let keep = half_class_members(&r, &mut SimRng::seed_from_u64(1), None).unwrap();
        assert_eq!(count(&r, &keep, Role::Child), 6);
    }

    #[test]
    fn deterministic_per_seed() {
        let r = roster(2, 1);
        let a = half_class_members(&r, &mut SimRng::seed_from_u64(77), None).unwrap();
        for _ in 0..5 {
            assert_eq!(half_class_members(&r, &mut SimRng::seed_from_u64(77), None).unwrap(), a);
        }
    }

    #[test]
    fn forced_member_is_kept() {
        let r = roster(7, 2);
        for seed in 0..50 {
            for forced in 0..r.len() {
                let keep = half_class_members(&r, &mut SimRng::seed_from_u64(seed), Some(forced)).unwrap();
                assert!(keep.contains(&forced));
                assert_eq!(keep.len(), 4 + 1);
                assert_eq!(count(&r, &keep, Role::Teacher), 1);
            }
        }
    }

    #[test]
    fn no_teacher() {
        let r = roster(4, 0);
        assert!(matches!(
            half_class_members(&r, &mut SimRng::seed_from_u64(1), None),
            Err(ScenarioError::NoTeacher)
        ));
    }

    #[test]
    fn vaccination_extremes() {
        let r = roster(5, 3);
        let mut rng = SimRng::seed_from_u64(4);
        assert!(apply_vaccination(&r, 0.0, &mut rng).iter().all(|&x| !x));
        let all = apply_vaccination(&r, 1.0, &mut rng);
        assert_eq!(all, vec![false, false, false, false, false, true, true, true]);
    }
}
