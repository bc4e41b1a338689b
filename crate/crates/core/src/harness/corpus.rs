//! Benchmark target generation.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{forward_kinematics, Config, ConfigCi1, ConfigCi2, ConfigClass, Pose, StructuralParams};
use crate::workspace::position_reachable;
use crate::{Error, Result};

/// How a test case's target was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Forward kinematics of a random configuration inside the limits.
    FkGenerated,
    /// Reachable position with a random orientation.
    RandomOrientation,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::FkGenerated => "fk_generated",
            Provenance::RandomOrientation => "random_orientation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: u64,
    pub config_class: ConfigClass,
    pub target: Pose,
    pub provenance: Provenance,
    /// Corpus seed; the case's random stream is `(seed, id)`.
    pub seed: u64,
    /// Generating configuration of FK-generated targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Config>,
}

/// Random stream of case `id`, independent of every other case.
fn case_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform sample of the configuration box. `L1 ≥ r1_min·θ1` is enforced by
/// rejecting `(θ1, L1)` pairs.
pub fn random_config(rng: &mut impl Rng, params: &StructuralParams, class: ConfigClass) -> Config {
    let p = params;
    let mut angle = || rng.gen_range(-PI..PI);
    let (phi, delta1, delta2) = (angle(), angle(), angle());
    let theta2 = rng.gen_range(0.0..=p.theta2_max);
    match class {
        ConfigClass::Ci1 => {
            let (theta1, l1) = loop {
                let t1 = rng.gen_range(0.0..=p.theta1_max);
                let l1 = rng.gen_range(0.0..=p.l10);
                if l1 >= p.r1_min * t1 {
                    break (t1, l1);
                }
            };
            Config::Ci1(ConfigCi1 {
                phi,
                theta1,
                l1,
                delta1,
                theta2,
                delta2,
            })
        }
        ConfigClass::Ci2 => Config::Ci2(ConfigCi2 {
            ls: rng.gen_range(0.0..=p.ls_max),
            phi,
            theta1: rng.gen_range(0.0..=p.theta1_max),
            delta1,
            theta2,
            delta2,
        }),
    }
}

/// `n` targets from forward kinematics of uniformly sampled configurations.
pub fn generate_reachable_corpus(
    params: &StructuralParams,
    class: ConfigClass,
    n: usize,
    seed: u64,
) -> Vec<TestCase> {
    (0..n as u64)
        .map(|id| {
            let mut rng = case_rng(seed, id);
            let config = random_config(&mut rng, params, class);
            let target = forward_kinematics(params, &config).expect("sampled configuration is inside its domain");
            TestCase {
                id,
                config_class: class,
                target,
                provenance: Provenance::FkGenerated,
                seed,
                config: Some(config),
            }
        })
        .collect()
}

/// Box enclosing every reachable position.
fn position_box(params: &StructuralParams, class: ConfigClass) -> ([f64; 2], [f64; 2]) {
    let reach = params.l10 + params.lr + params.l20 + params.lg;
    let top = match class {
        ConfigClass::Ci1 => reach,
        ConfigClass::Ci2 => reach + params.ls_max,
    };
    ([-reach, reach], [-reach, top])
}

/// Rotation from intrinsic Z-Y-X Euler angles, each uniform on its range.
pub fn random_euler_rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    let yaw = rng.gen_range(-PI..PI);
    let pitch = rng.gen_range(-PI / 2.0..=PI / 2.0);
    let roll = rng.gen_range(-PI..PI);
    Rotation3::from_euler_angles(roll, pitch, yaw)
}

/// `n` targets at positions drawn uniformly from the translational
/// workspace (by rejection from its bounding box), with orientations from
/// uniform Euler angles.
pub fn generate_random_orientation_corpus(
    params: &StructuralParams,
    class: ConfigClass,
    n: usize,
    seed: u64,
) -> Vec<TestCase> {
    let (xy, z) = position_box(params, class);
    (0..n as u64)
        .map(|id| {
            let mut rng = case_rng(seed, id);
            let position = loop {
                let p = Vector3::new(
                    rng.gen_range(xy[0]..=xy[1]),
                    rng.gen_range(xy[0]..=xy[1]),
                    rng.gen_range(z[0]..=z[1]),
                );
                if position_reachable(&p, class, params) {
                    break p;
                }
            };
            let rotation = random_euler_rotation(&mut rng);
            TestCase {
                id,
                config_class: class,
                target: Pose::new(position, rotation.into_inner()),
                provenance: Provenance::RandomOrientation,
                seed,
                config: None,
            }
        })
        .collect()
}

pub fn write_corpus(cases: &[TestCase], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, cases)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<TestCase>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus() {
        let p = StructuralParams::default();
        assert!(generate_reachable_corpus(&p, ConfigClass::Ci1, 0, 1).is_empty());
        assert!(generate_random_orientation_corpus(&p, ConfigClass::Ci2, 0, 1).is_empty());
    }

    #[test]
    fn cases_do_not_depend_on_corpus_size() {
        let p = StructuralParams::default();
        let a = generate_reachable_corpus(&p, ConfigClass::Ci1, 5, 9);
        let b = generate_reachable_corpus(&p, ConfigClass::Ci1, 8, 9);
        assert_eq!(a[..], b[..5]);
        assert_ne!(a[0], generate_reachable_corpus(&p, ConfigClass::Ci1, 1, 10)[0]);
    }

    #[test]
    fn sampled_configurations_respect_limits() {
        let p = StructuralParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for class in [ConfigClass::Ci1, ConfigClass::Ci2] {
            for _ in 0..500 {
                assert!(random_config(&mut rng, &p, class).check_limits(&p, 0.0).is_ok());
            }
        }
    }

    #[test]
    fn euler_rotation_is_intrinsic_zyx() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_euler_rotation(&mut rng);
        let (roll, pitch, yaw) = r.euler_angles();
        let z = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
        let y = Rotation3::from_axis_angle(&Vector3::y_axis(), pitch);
        let x = Rotation3::from_axis_angle(&Vector3::x_axis(), roll);
        assert!(((z * y * x).into_inner() - r.into_inner()).norm() < 1e-12);
    }
}
