//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line and
//! fails if its criterion is not met. Run with
//! `cargo test --release -p sma-core --test acceptance -- --nocapture --test-threads=1`.

mod common;

use sma_core::automaton::{Direction, Way};
use sma_core::config::{load_config, Overrides};
use sma_core::env::{action_space_size, step_limit, AgentAction, EnvState, EpisodeConfig, REWARDS};
use sma_core::eval::{evaluate, EvalReport};
use sma_core::genetic::{self, Chromosome, GaConfig, GaContext, Individual, Layout, SmaAgent, TrainingSet};
use sma_core::languages::LanguageId;
use sma_core::policy::{play_episode, Policy, RandomPolicy};
use sma_core::qlearn::{self, QAgent, QConfig};
use sma_core::seed;

const MAX_LEN: usize = 20;
const EVAL_EPISODES: usize = 10_000;

// criterion 1
const RANDOM_RATE: (f64, f64) = (0.48, 0.52);
const RANDOM_LENGTH_TOLERANCE: f64 = 0.05;
// criterion 2
const GA_REGULAR_GENERATIONS: u64 = 200;
const GA_REGULAR_RATE: f64 = 0.99;
// criterion 3
const GA_L3_RATE: f64 = 0.99;
const GA_L5_RATE: f64 = 0.95;
const GA_HARD_RATE: f64 = 0.75;
const GA_BUDGET: usize = 2000;
const GA_SEEDS: [u64; 3] = [1, 2, 3];
// criterion 4
const Q_STEPS: usize = 2_000_000;
const Q_RATE: f64 = 0.99;
const Q_LENGTH: f64 = 15.0;
const Q_SEED: u64 = 2;
// criterion 5
const Q_L3_STEPS: usize = 500_000;
const Q_L3_MARGIN: f64 = 1.0;
// criterion 6
const GRADIENT_TOLERANCE: f64 = 1e-4;
const OVERFIT_LOSS: f64 = 1e-3;
const OVERFIT_UPDATES: usize = 5000;

fn verdict(criterion: &str, passed: bool, detail: String) {
    println!("{} {criterion}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "{criterion}: {detail}");
}

fn eval_policy(policy: &mut dyn Policy, id: LanguageId, label: &str) -> EvalReport {
    let config = EpisodeConfig::new(id.profile(), MAX_LEN);
    evaluate(policy, &config, EVAL_EPISODES, &mut seed::stream(2024, label, id as u64)).0
}

fn random_report(id: LanguageId) -> EvalReport {
    let config = EpisodeConfig::new(id.profile(), MAX_LEN);
    eval_policy(&mut RandomPolicy::new(&config), id, "acceptance-random")
}

#[test]
fn criterion_1_random_baselines() {
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for id in LanguageId::ALL {
        let report = random_report(id);
        let half = id.profile().action_count() as f64 / 2.0;
        let rate_ok = (RANDOM_RATE.0..=RANDOM_RATE.1).contains(&report.prediction_rate);
        let length_ok = (report.avg_episode_length - half).abs() <= RANDOM_LENGTH_TOLERANCE * half;
        if !(rate_ok && length_ok) {
            failures.push(id);
        }
        lines.push(format!(
            "{id}R rate {:.3} length {:.2} (A/2 = {half})",
            report.prediction_rate, report.avg_episode_length
        ));
    }
    verdict("criterion 1 (random baselines)", failures.is_empty(), lines.join("; "));
}

fn ga_run(id: LanguageId, seed: u64, max_generations: usize) -> (Option<u64>, u64, EvalReport) {
    let config = GaConfig {
        max_generations,
        ..GaConfig::default()
    };
    let outcome = genetic::train_ga(&id.profile(), MAX_LEN, &config, seed).unwrap();
    let report = eval_policy(&mut SmaAgent::new(&outcome.best), id, "acceptance-ga");
    (outcome.validated_at, outcome.checkpoint.generation, report)
}

#[test]
fn criterion_2_ga_regular_languages() {
    let mut passed = true;
    let mut lines = Vec::new();
    for id in [LanguageId::L1, LanguageId::L2] {
        let (validated, _, report) = ga_run(id, 1, GA_REGULAR_GENERATIONS as usize);
        let ok = validated.is_some_and(|g| g <= GA_REGULAR_GENERATIONS) && report.prediction_rate >= GA_REGULAR_RATE;
        passed &= ok;
        lines.push(format!(
            "{id}G validated at {validated:?}, rate {:.4}, length {:.2}",
            report.prediction_rate, report.avg_episode_length
        ));
    }
    verdict("criterion 2 (GA on L1, L2)", passed, lines.join("; "));
}

/// Best evaluation rate over the permitted seeds, stopping at the first pass.
fn best_of_seeds(id: LanguageId, threshold: f64, seeds: &[u64]) -> (bool, String) {
    let mut best: Option<(u64, EvalReport)> = None;
    for &seed in seeds {
        let (_, generations, report) = ga_run(id, seed, GA_BUDGET);
        println!("  {id}G seed {seed}: rate {:.4} after {generations} generations", report.prediction_rate);
        if best.as_ref().map_or(true, |(_, b)| report.prediction_rate > b.prediction_rate) {
            best = Some((seed, report));
        }
        if best.as_ref().unwrap().1.prediction_rate >= threshold {
            break;
        }
    }
    let (seed, report) = best.unwrap();
    (
        report.prediction_rate >= threshold,
        format!("{id}G rate {:.4} (seed {seed}, need {threshold})", report.prediction_rate),
    )
}

#[test]
fn criterion_3_ga_non_regular_languages() {
    let cases = [
        (LanguageId::L3, GA_L3_RATE, &GA_SEEDS[..1]),
        (LanguageId::L5, GA_L5_RATE, &GA_SEEDS[..]),
        (LanguageId::L4, GA_HARD_RATE, &GA_SEEDS[..]),
        (LanguageId::L6, GA_HARD_RATE, &GA_SEEDS[..]),
    ];
    let mut passed = true;
    let mut lines = Vec::new();
    for (id, threshold, seeds) in cases {
        let (ok, line) = best_of_seeds(id, threshold, seeds);
        passed &= ok;
        lines.push(line);
    }
    verdict("criterion 3 (GA on L3, L4, L5, L6)", passed, lines.join("; "));
}

fn q_config(steps: usize) -> QConfig {
    QConfig {
        max_env_steps: steps,
        ..QConfig::default()
    }
}

#[test]
fn criterion_4_q_regular_languages() {
    let mut passed = true;
    let mut lines = Vec::new();
    for id in [LanguageId::L1, LanguageId::L2] {
        let config = QConfig {
            stop_prediction_rate: Some(Q_RATE),
            stop_max_length: Some(Q_LENGTH),
            ..q_config(Q_STEPS)
        };
        let outcome = qlearn::train_q(&id.profile(), MAX_LEN, &config, Q_SEED).unwrap();
        let report = eval_policy(&mut QAgent::new(&outcome.network, &id.profile(), 0.0), id, "acceptance-q");
        let ok = outcome.env_steps <= Q_STEPS as u64
            && report.prediction_rate >= Q_RATE
            && report.avg_episode_length <= Q_LENGTH;
        passed &= ok;
        lines.push(format!(
            "{id}Q rate {:.4}, length {:.2}, reward {:.3} after {} steps",
            report.prediction_rate, report.avg_episode_length, report.avg_reward, outcome.env_steps
        ));
    }
    verdict("criterion 4 (Q-learning on L1, L2)", passed, lines.join("; "));
}

#[test]
fn criterion_5_q_beats_random_on_l3() {
    let id = LanguageId::L3;
    let outcome = qlearn::train_q(&id.profile(), MAX_LEN, &q_config(Q_L3_STEPS), Q_SEED).unwrap();
    let trained = eval_policy(&mut QAgent::new(&outcome.network, &id.profile(), 0.0), id, "acceptance-q");
    let random = random_report(id);
    verdict(
        "criterion 5 (Q-learning on L3 beats random)",
        trained.avg_reward >= random.avg_reward + Q_L3_MARGIN,
        format!(
            "L3Q reward {:.3} (rate {:.3}) vs L3R {:.3}",
            trained.avg_reward, trained.prediction_rate, random.avg_reward
        ),
    );
}

fn roundtrip_failures() -> usize {
    (0..1000u64)
        .filter(|&i| {
            let id = LanguageId::ALL[i as usize % 6];
            let layout = Layout::for_profile(&id.profile(), 1 + (i as usize % 40));
            let chromosome = Chromosome::random(&layout, &mut seed::stream(6, "roundtrip", i));
            let spec = chromosome.decode(&layout).unwrap();
            Chromosome::encode(&spec) != chromosome || Chromosome::encode(&spec).decode(&layout).unwrap() != spec
        })
        .count()
}

fn elitism_holds() -> bool {
    let profile = LanguageId::L3.profile();
    let config = GaConfig::default();
    let ctx = GaContext::new(&profile, MAX_LEN, &config, 6);
    let set = TrainingSet::generate(&profile, MAX_LEN, config.training_set_size, 6);
    let mut population: Vec<Individual> = (0..config.population_size)
        .map(|i| ctx.evaluate(Chromosome::random(&ctx.layout, &mut seed::stream(6, "elite", i as u64)), &set))
        .collect();
    let mut best = population.iter().map(|i| i.fitness).fold(f64::NEG_INFINITY, f64::max);
    for generation in 1..=50 {
        population = genetic::evolve_generation(population, &set, &ctx, generation);
        if population[0].fitness < best {
            return false;
        }
        best = population[0].fitness;
    }
    true
}

/// The five reward outcomes, each provoked by a scripted L1 episode.
fn reward_table() -> Vec<(&'static str, f64, f64)> {
    let config = EpisodeConfig::new(LanguageId::L1.profile(), MAX_LEN);
    let right = AgentAction::Move {
        head: 0,
        direction: Direction::Right,
    };
    let run = |word: &[usize], label: bool, actions: &[AgentAction]| {
        let (mut state, _) = EnvState::with_input(&config, word, label).unwrap();
        actions.iter().map(|&a| state.step(a).unwrap().reward).collect::<Vec<_>>()
    };
    let mut late = vec![right; config.limit - 1];
    late.push(AgentAction::RejectHalt);
    vec![
        ("correct", run(&[0, 1], true, &[right, right, AgentAction::AcceptHalt])[2], REWARDS.correct),
        ("wrong", run(&[0, 0], false, &[right, right, AgentAction::AcceptHalt])[2], REWARDS.wrong),
        ("wrong before end", run(&[0, 1], true, &[AgentAction::RejectHalt])[0], REWARDS.wrong_before_end),
        ("late reject", *run(&[1, 1], false, &late).last().unwrap(), REWARDS.late_reject),
        ("step", run(&[0, 1], true, &[right])[0], REWARDS.step),
    ]
}

fn max_episode_length_over_limit() -> bool {
    LanguageId::ALL.iter().any(|&id| {
        let config = EpisodeConfig::new(id.profile(), MAX_LEN);
        let layout = Layout::for_profile(&id.profile(), 8);
        let mut rng = seed::stream(6, "lengths", id as u64);
        (0..500u64).any(|i| {
            let spec = Chromosome::random(&layout, &mut seed::stream(6, "machines", i)).decode(&layout).unwrap();
            let (mut state, obs) = EnvState::reset(&config, &mut rng);
            let mut random = RandomPolicy::new(&config);
            let (mut state2, obs2) = EnvState::reset(&config, &mut rng);
            play_episode(&mut SmaAgent::new(&spec), &mut state, obs, &mut rng).length > config.limit
                || play_episode(&mut random, &mut state2, obs2, &mut rng).length > config.limit
        })
    })
}

fn formulas_hold() -> bool {
    let l1 = load_config(
        None,
        Overrides {
            language: Some(LanguageId::L1),
            ..Overrides::default()
        },
    )
    .unwrap()
    .derived();
    step_limit(20, 1) == 42
        && action_space_size(2, Way::TwoWay) == 8
        && Layout::for_profile(&LanguageId::L2.profile(), 32).len() == 192
        && (l1.step_limit, l1.actions, l1.chromosome_len) == (42, 4, 192)
}

#[test]
fn criterion_6_property_suites() {
    let started = std::time::Instant::now();
    let mut passed = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("  {} {name}: {detail}", if ok { "ok" } else { "FAIL" });
        passed &= ok;
    };

    let failures = roundtrip_failures();
    check("encode/decode roundtrip", failures == 0, format!("{failures} of 1000 differ"));
    check("elitism over 50 generations", elitism_holds(), "best fitness never decreases".into());

    let table = reward_table();
    let mismatched: Vec<_> = table.iter().filter(|(_, got, want)| got != want).collect();
    check(
        "reward table",
        mismatched.is_empty(),
        table.iter().map(|(n, got, _)| format!("{n} {got}")).collect::<Vec<_>>().join(", "),
    );
    check("episode length <= N", !max_episode_length_over_limit(), "random and SMA agents".into());
    check("N, A, C formulas", formulas_hold(), "(20,1)->42, (2,two-way)->8, (32,4)->192".into());

    let disagreements: usize = LanguageId::ALL.iter().map(|&id| common::membership_disagreements(id, 12)).sum();
    check("membership vs brute force, |w| <= 12", disagreements == 0, format!("{disagreements} disagreements"));

    let worst = (0..3).map(common::worst_gradient_error).fold(0.0, f64::max);
    check("gradient check, H = 4", worst < GRADIENT_TOLERANCE, format!("worst relative error {worst:.2e}"));

    let updates = common::overfit_updates(OVERFIT_LOSS, OVERFIT_UPDATES);
    let detail = match updates {
        Some(n) => format!("loss < {OVERFIT_LOSS} after {n} updates"),
        None => format!("loss still ≥ {OVERFIT_LOSS} after {OVERFIT_UPDATES} updates"),
    };
    check("overfit one batch", updates.is_some(), detail);

    let elapsed = started.elapsed();
    verdict("criterion 6 (property suites)", passed, format!("all sub-checks in {elapsed:.1?}"));
}
