mod common;

use airs::agent::{OptimizerChoice, TrainerMode};
use airs::config::TrainConfig;
use airs::envs::Variant;
use airs::rewards::RewardKind;

fn load(name: &str) -> TrainConfig {
    let cfg = TrainConfig::load(common::repo_root().join("configs").join(name)).unwrap();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn every_shipped_config_validates_and_round_trips() {
    let dir = common::repo_root().join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = TrainConfig::load(&path).unwrap();
            cfg.validate().unwrap();
            assert_eq!(TrainConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
            n += 1;
        }
    }
    assert!(n >= 3);
}

#[test]
fn a2c_baseline_uses_the_reference_hyperparameters() {
    let cfg = load("empty9_a2c.toml");
    let a = &cfg.agent;
    assert_eq!(a.mode, TrainerMode::A2cAdvantageInjection);
    assert_eq!(a.optimizer, OptimizerChoice::Rmsprop);
    assert_eq!((a.lr, a.entropy_coef, a.value_coef, a.gamma, a.gae_lambda, a.max_grad_norm), (0.001, 0.01, 0.5, 0.99, 0.95, 0.5));
    assert_eq!((a.n_steps, a.n_envs), (5, 16));
    assert!(cfg.shaping.reward_set.is_empty());
    assert_eq!(cfg.env.variant, Variant::Empty(9));
}

#[test]
fn airs_pool_is_identity_and_re3() {
    let cfg = load("empty9_airs.toml");
    assert_eq!(cfg.shaping.reward_set, vec![RewardKind::Identity, RewardKind::Re3]);
    assert_eq!((cfg.shaping.bandit.c, cfg.shaping.bandit.window), (0.1, 10));
    assert_eq!(cfg.run.updates * (cfg.agent.n_envs * cfg.agent.n_steps) as u64, 200_000);
}
