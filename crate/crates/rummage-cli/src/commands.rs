//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use rummage_core::container::Scenario;
use rummage_core::eval::{
    adaptation_round_sweep, brute_force_oracle, evaluate, eval_scene_seed, find_gated_scenes,
};
use rummage_core::net::checkpoint::{self, Checkpoint};
use rummage_core::net::{ModelBundle, ModelKind, PlaceModel, PointScoreModel};
use rummage_core::obs::{render_cloud, CameraPose};
use rummage_core::policy::{run_episode, PolicyConfig};
use rummage_core::sim::entanglement;
use rummage_core::snapshot;
use rummage_core::train::{
    build_scene, collect_pick_data, collect_place_data, collect_retrieval_data,
    online_finetune_pick, online_finetune_place, online_finetune_retrieval, train_place,
    train_point_score, Dataset,
};
use rummage_core::WorldConfig;

use crate::config::{parse_scenario, RunConfig};
use crate::report;
use crate::{CliArgs, CliCommand};

struct Ctx {
    cfg: RunConfig,
    world: WorldConfig,
    out_dir: PathBuf,
}

impl Ctx {
    fn new(args: &CliArgs) -> Result<Self> {
        let mut cfg = RunConfig::load(args.config.as_deref())?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &args.out {
            cfg.output_dir = out.clone();
        }
        let world = cfg.world()?;
        let out_dir = PathBuf::from(&cfg.output_dir);
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating output dir {}", out_dir.display()))?;
        Ok(Ctx { cfg, world, out_dir })
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn load_point_score(&self, path: &str, kind: ModelKind) -> Result<PointScoreModel<f32>> {
        let bytes = fs::read(path).with_context(|| format!("reading checkpoint {path}"))?;
        match (checkpoint::decode(&bytes)?, kind) {
            (Checkpoint::Retrieve(m), ModelKind::Retrieve) => Ok(m),
            (Checkpoint::Pick(m), ModelKind::Pick) => Ok(m),
            (got, want) => bail!("checkpoint {path} holds a {} model, expected {}", got.kind().name(), want.name()),
        }
    }

    fn load_place(&self, path: &str) -> Result<PlaceModel<f32>> {
        let bytes = fs::read(path).with_context(|| format!("reading checkpoint {path}"))?;
        match checkpoint::decode(&bytes)? {
            Checkpoint::Place(m) => Ok(m),
            got => bail!("checkpoint {path} holds a {} model, expected place", got.kind().name()),
        }
    }

    /// Assembles the bundle; untrained stand-ins are not allowed here, the
    /// supervision chain is enforced by requiring actual checkpoint paths.
    fn bundle(&self, retrieval: &str, place: Option<&str>, pick: Option<&str>) -> Result<ModelBundle> {
        let retrieval = self.load_point_score(retrieval, ModelKind::Retrieve)?;
        let place_model = match place {
            Some(path) => self.load_place(path)?,
            None => PlaceModel::desk(self.world.place_points(), 0)
                .map_err(anyhow::Error::from)?,
        };
        let pick_model = match pick {
            Some(path) => self.load_point_score(path, ModelKind::Pick)?,
            None => PointScoreModel::desk(self.world.n_points, 0)
                .map_err(anyhow::Error::from)?,
        };
        Ok(ModelBundle {
            retrieval,
            place: place_model,
            pick: pick_model,
            place_points: self.world.place_points(),
        })
    }

    fn dataset(&self, path: &str) -> Result<Dataset> {
        let bytes = fs::read(path).with_context(|| format!("reading dataset {path}"))?;
        Ok(Dataset::decode(&bytes)?)
    }
}

fn ablation_policy(base: PolicyConfig, name: &str) -> Result<PolicyConfig> {
    Ok(match name {
        "none" => base,
        "no-adapt" => PolicyConfig { max_adapt_rounds: 0, ..base },
        "no-pick" => PolicyConfig { pick_rule: rummage_core::policy::PickRule::Random, ..base },
        "no-place" => PolicyConfig { place_rule: rummage_core::policy::PlaceRule::Random, ..base },
        "random" => PolicyConfig {
            retrieve_rule: rummage_core::policy::RetrieveRule::Random,
            max_adapt_rounds: 0,
            ..base
        },
        "highest" => PolicyConfig {
            retrieve_rule: rummage_core::policy::RetrieveRule::Highest,
            max_adapt_rounds: 0,
            ..base
        },
        other => bail!("unknown ablation '{other}'"),
    })
}

pub fn run(args: CliArgs) -> Result<()> {
    let ctx = Ctx::new(&args)?;
    match &args.command {
        CliCommand::GenScenes { count, scenario } => {
            let scenario = parse_scenario(scenario)?;
            for i in 0..*count {
                let scene_seed = eval_scene_seed(ctx.cfg.seed, i as u64);
                let state = build_scene(&ctx.world, scenario, scene_seed)?;
                let blob = snapshot::snapshot(&state);
                let tangle = entanglement(&state, &ctx.world.sim);
                ctx.write(&format!("scene-{}-{scene_seed:016x}.pile", scenario.name()), &blob)?;
                println!(
                    "scene {i}: seed {scene_seed:016x}, {} garments, entanglement {tangle}",
                    state.garments.len()
                );
            }
            Ok(())
        }

        CliCommand::CollectRetrieve { count } => {
            let scenarios = ctx.cfg.scenarios()?;
            let dataset = collect_retrieval_data(&ctx.world, &scenarios, *count, ctx.cfg.seed)?;
            println!(
                "collected {} samples ({} positive / {} negative)",
                dataset.len(),
                dataset.positives(ModelKind::Retrieve),
                dataset.negatives(ModelKind::Retrieve)
            );
            ctx.write("retrieve.affd", &dataset.encode())?;
            Ok(())
        }

        CliCommand::CollectPlace { retrieval, count } => {
            let scenarios = ctx.cfg.scenarios()?;
            let retrieval = ctx.load_point_score(retrieval, ModelKind::Retrieve)?;
            let dataset =
                collect_place_data(&ctx.world, &retrieval, &scenarios, *count, ctx.cfg.seed)?;
            println!(
                "collected {} samples ({} positive / {} negative)",
                dataset.len(),
                dataset.positives(ModelKind::Place),
                dataset.negatives(ModelKind::Place)
            );
            ctx.write("place.affd", &dataset.encode())?;
            Ok(())
        }

        CliCommand::CollectPick { retrieval, place, count } => {
            let scenarios = ctx.cfg.scenarios()?;
            let retrieval = ctx.load_point_score(retrieval, ModelKind::Retrieve)?;
            let place_model = ctx.load_place(place)?;
            let dataset = collect_pick_data(
                &ctx.world,
                &retrieval,
                &place_model,
                &scenarios,
                *count,
                ctx.cfg.seed,
            )?;
            println!(
                "collected {} samples ({} positive / {} negative)",
                dataset.len(),
                dataset.positives(ModelKind::Pick),
                dataset.negatives(ModelKind::Pick)
            );
            ctx.write("pick.affd", &dataset.encode())?;
            Ok(())
        }

        CliCommand::Train { kind, dataset } => {
            let dataset = ctx.dataset(dataset)?;
            match kind.as_str() {
                "retrieve" | "pick" => {
                    let model_kind = if kind == "retrieve" { ModelKind::Retrieve } else { ModelKind::Pick };
                    let cfg = ctx.cfg.train_config(false);
                    let (model, curve) = train_point_score(model_kind, &dataset, &cfg)?;
                    let bytes = checkpoint::encode_point_score(&model, model_kind)?;
                    ctx.write(&format!("{kind}.aff1"), &bytes)?;
                    ctx.write(&format!("{kind}-loss.csv"), report::loss_curve_csv(&curve).as_bytes())?;
                }
                "place" => {
                    let cfg = ctx.cfg.train_config(true);
                    let (model, curve) = train_place(&dataset, &cfg)?;
                    let bytes = checkpoint::encode_place(&model)?;
                    ctx.write("place.aff1", &bytes)?;
                    ctx.write("place-loss.csv", report::loss_curve_csv(&curve).as_bytes())?;
                }
                other => bail!("unknown kind '{other}' (retrieve | place | pick)"),
            }
            Ok(())
        }

        CliCommand::OnlineTune { kind, model, dataset, retrieval, place, iterations } => {
            let scenarios = ctx.cfg.scenarios()?;
            let offline = ctx.dataset(dataset)?;
            let mut tune_cfg = ctx.cfg.finetune_config();
            if let Some(iters) = iterations {
                tune_cfg.max_iterations = *iters;
            }
            match kind.as_str() {
                "retrieve" => {
                    let mut m = ctx.load_point_score(model, ModelKind::Retrieve)?;
                    let rep = online_finetune_retrieval(&mut m, &offline, &ctx.world, &scenarios, &tune_cfg)?;
                    println!(
                        "episodes {}, updates {}, buffered failures {}, stopped early: {}",
                        rep.episodes, rep.updates, rep.failures_buffered, rep.stopped_early
                    );
                    ctx.write("retrieve-tuned.aff1", &checkpoint::encode_point_score(&m, ModelKind::Retrieve)?)?;
                }
                "pick" => {
                    let retrieval_path = retrieval.as_deref().context("--retrieval is required for pick tuning")?;
                    let place_path = place.as_deref().context("--place is required for pick tuning")?;
                    let frozen_retrieval = ctx.load_point_score(retrieval_path, ModelKind::Retrieve)?;
                    let frozen_place = ctx.load_place(place_path)?;
                    let mut m = ctx.load_point_score(model, ModelKind::Pick)?;
                    let rep = online_finetune_pick(
                        &mut m, &frozen_retrieval, &frozen_place, &offline, &ctx.world, &scenarios, &tune_cfg,
                    )?;
                    println!(
                        "episodes {}, updates {}, buffered failures {}, stopped early: {}",
                        rep.episodes, rep.updates, rep.failures_buffered, rep.stopped_early
                    );
                    ctx.write("pick-tuned.aff1", &checkpoint::encode_point_score(&m, ModelKind::Pick)?)?;
                }
                "place" => {
                    let retrieval_path = retrieval.as_deref().context("--retrieval is required for place tuning")?;
                    let frozen_retrieval = ctx.load_point_score(retrieval_path, ModelKind::Retrieve)?;
                    let mut m = ctx.load_place(model)?;
                    let rep = online_finetune_place(
                        &mut m, &frozen_retrieval, &offline, &ctx.world, &scenarios, &tune_cfg,
                    )?;
                    println!(
                        "episodes {}, updates {}, buffered failures {}, stopped early: {}",
                        rep.episodes, rep.updates, rep.failures_buffered, rep.stopped_early
                    );
                    ctx.write("place-tuned.aff1", &checkpoint::encode_place(&m)?)?;
                }
                other => bail!("unknown kind '{other}'"),
            }
            Ok(())
        }

        CliCommand::Eval { retrieval, place, pick, scenario, scenes, ablation } => {
            let scenario = parse_scenario(scenario)?;
            let bundle = ctx.bundle(retrieval, place.as_deref(), pick.as_deref())?;
            let policy = ablation_policy(ctx.cfg.policy(), ablation)?;
            if policy.max_adapt_rounds > 0 && (place.is_none() || pick.is_none()) {
                bail!("adaptation requires --place and --pick checkpoints (or use --ablation no-adapt)");
            }
            let report_data = evaluate(&bundle, &ctx.world, scenario, *scenes, ctx.cfg.seed, &policy)?;
            print!("{}", report::eval_summary(&format!("eval ({ablation})"), &report_data));
            let csv = format!("{}\n{}\n", report::EVAL_CSV_HEADER, report::eval_csv_row(&report_data));
            ctx.write(&format!("eval-{}-{ablation}.csv", scenario.name()), csv.as_bytes())?;
            if report_data.incomplete_episodes > 0 {
                println!("note: {} incomplete episodes", report_data.incomplete_episodes);
            }
            Ok(())
        }

        CliCommand::SweepRounds { retrieval, place, pick, scenario, scenes, max_p_high } => {
            let scenario = parse_scenario(scenario)?;
            let bundle = ctx.bundle(retrieval, Some(place), Some(pick))?;
            let seeds = match max_p_high {
                Some(gate) => find_gated_scenes(&bundle, &ctx.world, scenario, *scenes as usize, ctx.cfg.seed, *gate)?,
                None => {
                    let mut seeds = Vec::new();
                    let mut index = 0u64;
                    while seeds.len() < *scenes as usize {
                        let s = eval_scene_seed(ctx.cfg.seed, index);
                        index += 1;
                        if build_scene(&ctx.world, scenario, s).is_ok() {
                            seeds.push(s);
                        }
                    }
                    seeds
                }
            };
            let rows = adaptation_round_sweep(&bundle, &ctx.world, scenario, &seeds, ctx.cfg.seed)?;
            for row in &rows {
                println!(
                    "rounds {:7}: success rate {:.3} ({}/{})",
                    row.label, row.report.success_rate, row.report.successes, row.report.attempts
                );
            }
            ctx.write(&format!("sweep-{}.csv", scenario.name()), report::sweep_csv(&rows).as_bytes())?;
            Ok(())
        }

        CliCommand::Oracle { scenario, scene_seed, candidates } => {
            let scenario = parse_scenario(scenario)?;
            let state = build_scene(&ctx.world, scenario, *scene_seed)?;
            let indices: Vec<usize> = (0..*candidates).collect();
            let successes = brute_force_oracle(&state, &ctx.world, &indices)?;
            println!(
                "oracle over {} candidates: {} succeed: {:?}",
                candidates,
                successes.len(),
                successes
            );
            Ok(())
        }

        CliCommand::ExportAffordance { retrieval, scenario, scene_seed, out_file } => {
            let scenario = parse_scenario(scenario)?;
            let model = ctx.load_point_score(retrieval, ModelKind::Retrieve)?;
            let state = build_scene(&ctx.world, scenario, *scene_seed)?;
            let camera = CameraPose::standard(&state.container);
            let obs = render_cloud(&state, &camera, ctx.world.n_points, ctx.world.sim.contact_radius)?;
            let map = model.affordance(obs.coords())?;
            let text = crate::ply::export_affordance(&obs, &map, ctx.world.config_hash)?;
            ctx.write(out_file, text.as_bytes())?;
            Ok(())
        }

        CliCommand::RunEpisode { retrieval, place, pick, scenario, scene_seed } => {
            let scenario = parse_scenario(scenario)?;
            let bundle = ctx.bundle(retrieval, Some(place), Some(pick))?;
            let state = build_scene(&ctx.world, scenario, *scene_seed)?;
            let log = run_episode(&bundle, state, &ctx.world, &ctx.cfg.policy(), *scene_seed)?;
            print!("{}", report::episode_text(&log));
            Ok(())
        }
    }
}
