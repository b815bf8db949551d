use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recourse_bench::fixture;
use recourse_core::belief::{posterior_sample, prior_sample, ChoiceItem, ChoiceLikelihood, ChoiceRecord};
use recourse_core::elicit::greedy_choice;
use recourse_core::generator::{mcts_plan, PolicyModel};
use recourse_core::search::exhaustive_search;

fn cost_model(c: &mut Criterion) {
    let d = fixture("synthetic");
    let states = d.unfavorable_states();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, w) = d.true_weights.sample(&mut rng);
    let s0 = states[0].clone();
    let oracle = exhaustive_search(&d.env, &s0, &w, 4, None).unwrap();
    let plan = oracle.worst.unwrap().intervention;
    c.bench_function("intervention_cost", |b| {
        b.iter(|| d.env.problem.intervention_cost(black_box(&plan), &s0, &w).unwrap())
    });
    c.bench_function("exhaustive_search_len4", |b| {
        b.iter(|| exhaustive_search(&d.env, black_box(&s0), &w, 4, None).unwrap())
    });
}

fn greedy(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pool: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..640).map(|_| rng.random_range(0.0..5.0)).collect())
        .collect();
    let refs: Vec<&[f64]> = pool.iter().map(Vec::as_slice).collect();
    c.bench_function("greedy_choice_k4_n640", |b| b.iter(|| greedy_choice(black_box(&refs), 4).unwrap()));
}

fn planner(c: &mut Criterion) {
    let d = fixture("synthetic");
    let s0 = d.unfavorable_states()[3].clone();
    let w = d.prior.mean();
    let policy = PolicyModel::new(&d.env.problem, d.generator.hidden, 0).unwrap();
    let env = Arc::new(d.env.clone());
    c.bench_function("mcts_plan_uniform_policy", |b| {
        b.iter(|| mcts_plan(&env, black_box(&s0), &w, &policy, &d.generator, None).unwrap())
    });
}

fn posterior(c: &mut Criterion) {
    let d = fixture("synthetic");
    let s0 = d.unfavorable_states()[5].clone();
    let actions = d.env.problem.feasible_actions(&s0);
    let record = ChoiceRecord::new(
        s0.clone(),
        actions
            .iter()
            .take(2)
            .map(|&a| ChoiceItem {
                first: a,
                intervention: vec![a],
                success: d.env.reaches_favorable(&[a], &s0).unwrap(),
            })
            .collect(),
        0,
    )
    .unwrap();
    let data = vec![record; 5];
    let lik = ChoiceLikelihood::compile(&d.env.problem, &data, 5.0, 2.0).unwrap();
    c.bench_function("posterior_sample_5_records", |b| {
        b.iter(|| posterior_sample(&d.prior, &lik, &d.session.sampler, black_box(3)).unwrap())
    });
    c.bench_function("prior_sample_640", |b| b.iter(|| prior_sample(&d.prior, 640, black_box(3)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = cost_model, greedy, planner, posterior
}
criterion_main!(benches);
