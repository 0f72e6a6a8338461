//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails the
//! run if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use ncbwt::channel::{BernoulliLink, ChannelParams};
use ncbwt::cli::{self, Cli};
use ncbwt::gf256::{gf_inv, gf_mul, Gf256};
use ncbwt::model::{additional_wnc, additional_wonc};
use ncbwt::protocol::TxRole;
use ncbwt::sim::{self, ExperimentConfig, Protocol, ProtocolSelect, Reaction, RunOptions};
use ncbwt::wire::{self, AckOption, CodingKind, RequestOption};
use ncbwt::Exact;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn analytic_exactness() -> Check {
    let half: Exact = Ratio::new(1, 2);
    let wonc = additional_wonc(500, half).map_err(|e| e.to_string())?;
    ensure(wonc == Ratio::from_integer(500), || {
        format!("A_WoNC(500, 0.5) = {wonc}")
    })?;

    let a03 = additional_wnc(500, half, Ratio::new(3, 10)).map_err(|e| e.to_string())?;
    let a07 = additional_wnc(500, half, Ratio::new(7, 10)).map_err(|e| e.to_string())?;
    ensure(a03 == Ratio::new(1500, 17), || {
        format!("A_WNC(500, 0.5, 0.3) = {a03}")
    })?;
    ensure(a07 == Ratio::new(3500, 13), || {
        format!("A_WNC(500, 0.5, 0.7) = {a07}")
    })?;

    let f03: f64 = additional_wnc(500, 0.5, 0.3).map_err(|e| e.to_string())?;
    let f07: f64 = additional_wnc(500, 0.5, 0.7).map_err(|e| e.to_string())?;
    ensure((f03 - 88.235).abs() <= 1e-3, || {
        format!("f64 A_WNC(.., 0.3) = {f03}")
    })?;
    ensure((f07 - 269.231).abs() <= 1e-3, || {
        format!("f64 A_WNC(.., 0.7) = {f07}")
    })?;
    for (got, loss) in [(f03, 0.15), (f07, 0.35)] {
        let oracle = common::series_additional(500, loss);
        ensure((got - oracle).abs() < 1e-6, || {
            format!("{got} vs series {oracle}")
        })?;
    }

    let mut points = 0;
    for n in [1u64, 2, 7, 50, 125, 500, 1000, 2000, 4096, 65535] {
        for (num, den) in [(0, 1), (1, 10), (1, 4), (1, 2), (9, 10)] {
            let p: Exact = Ratio::new(num, den);
            let wnc = additional_wnc(n, p, Ratio::from_integer(1)).map_err(|e| e.to_string())?;
            let wonc = additional_wonc(n, p).map_err(|e| e.to_string())?;
            ensure(wnc == wonc, || format!("alpha=1 mismatch at n={n}, p={p}"))?;
            points += 1;
        }
    }
    Ok(format!(
        "500 exact, 1500/17, 3500/13, alpha=1 equal on {points} points"
    ))
}

fn analyze_grid_shape() -> Check {
    let started = Instant::now();
    let args = Cli::try_parse_from(["ncbwt", "analyze"]).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    cli::run(&args, &mut out).map_err(|e| e.to_string())?;
    let text = String::from_utf8(out).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    ensure(lines.next() == Some(sim::CSV_HEADER), || {
        "header mismatch".into()
    })?;

    // (protocol, alpha key, block) -> [(p, value)]
    let mut table: BTreeMap<(String, u64, usize), Vec<(f64, f64)>> = BTreeMap::new();
    let mut rows = 0;
    for line in lines {
        let c: Vec<&str> = line.split(',').collect();
        ensure(c.len() == 10, || format!("bad row {line}"))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
        let alpha_key = (parse(c[3])? * 1000.0).round() as u64;
        let block: usize = c[1].parse().map_err(|_| format!("bad block {line}"))?;
        table
            .entry((c[0].to_string(), alpha_key, block))
            .or_default()
            .push((parse(c[2])?, parse(c[5])?));
        rows += 1;
    }
    ensure(rows == 2 * 3 * 19 * 3, || {
        format!("expected 342 rows, got {rows}")
    })?;

    for ((proto, alpha, block), series) in &table {
        for w in series.windows(2) {
            ensure(w[1].1 > w[0].1, || {
                format!(
                    "{proto} B={block} alpha={alpha}: not increasing at p={}",
                    w[1].0
                )
            })?;
        }
    }
    for ((proto, alpha, block), series) in &table {
        if *block == 256 {
            continue;
        }
        let small = &table[&(proto.clone(), *alpha, 256)];
        for (big, base) in series.iter().zip(small) {
            let holds = if big.0 > 0.0 {
                base.1 > big.1
            } else {
                base.1 >= big.1
            };
            ensure(holds, || {
                format!("{proto} B=256 not maximal at p={}", big.0)
            })?;
        }
    }
    for block in [256, 512, 1024] {
        let low = &table[&("NC_BWT".to_string(), 300, block)];
        let mid = &table[&("NC_BWT".to_string(), 700, block)];
        let one = &table[&("NC_BWT".to_string(), 1000, block)];
        let bwt = &table[&("BWT".to_string(), 1000, block)];
        for i in 1..low.len() {
            ensure(low[i].1 < mid[i].1 && mid[i].1 < one[i].1, || {
                format!("NC B={block} not decreasing in alpha at p={}", low[i].0)
            })?;
            ensure(one[i].1 == bwt[i].1, || {
                format!("alpha=1 curves differ at p={}", low[i].0)
            })?;
        }
    }
    let ms = started.elapsed().as_millis();
    ensure(ms < 1000, || format!("took {ms} ms"))?;
    Ok(format!(
        "{rows} rows, monotone in p, B=256 maximal, NC decreasing with alpha ({ms} ms)"
    ))
}

fn scenario_golden() -> Check {
    let (nc, nc_rounds, nc_used) = common::replay_walkthrough(Protocol::NcBwt);
    let (bwt, _, bwt_used) = common::replay_walkthrough(Protocol::Bwt);
    let triples: Vec<_> = nc_rounds.iter().filter_map(|r| r.ack_triple()).collect();
    ensure(
        triples == vec![(1, 1, 0), (2, 4, 2), (3, 4, 1), (4, 4, 0), (5, 5, 0)],
        || format!("NC ack triples {triples:?}"),
    )?;
    let native_p4 = nc_rounds.iter().any(|r| {
        r.ack_triple() == Some((3, 4, 1))
            && matches!(&r.reaction, Some(Reaction::Sent(v))
                if v.len() == 1 && v[0].0 == TxRole::NativeRepair
                    && v[0].1.no_t == 4 && v[0].1.no_e == 4 && v[0].1.is_native())
    });
    ensure(native_p4, || "ack (3,4,1) did not trigger native p4".into())?;
    ensure(nc.tx_total == 8 && bwt.tx_total == 9, || {
        format!("transmissions NC={} BWT={}", nc.tx_total, bwt.tx_total)
    })?;
    ensure(nc.tx_total + 1 == bwt.tx_total, || {
        "NC not exactly one shorter".into()
    })?;
    ensure(nc_used == 13 && bwt_used == 15, || {
        format!("tokens {nc_used}/{bwt_used}")
    })?;
    Ok("acks (2,4,2) then (3,4,1), native p4, NC 8 vs BWT 9 transmissions".into())
}

fn monte_carlo_agreement() -> Check {
    let n_blocks = 500;
    let config = ExperimentConfig {
        resource_bytes: n_blocks * 1024,
        block_bytes: vec![1024],
        p_grid: vec![0.1],
        alphas: vec![1.0],
        trials: 200,
        seed: 20_240_601,
        protocol: ProtocolSelect::Both,
    };
    let mut worst = 0.0f64;
    let mut summary = Vec::new();
    for (i, p) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let (mean, _) = sim::simulate_point(&config, Protocol::Bwt, 1024, p, 1.0, &[0, i as u64])
            .map_err(|e| e.to_string())?;
        let expected = n_blocks as f64 * p / (1.0 - p);
        let rel = (mean - expected).abs() / expected;
        worst = worst.max(rel);
        ensure(rel <= 0.05, || {
            format!("BWT p={p}: {mean:.2} vs {expected:.2}")
        })?;
        summary.push(format!("BWT p={p} {mean:.1}/{expected:.1}"));
    }
    for (i, (p, alpha)) in [(0.3, 0.3), (0.3, 0.7), (0.5, 0.3), (0.5, 0.7)]
        .into_iter()
        .enumerate()
    {
        let (mean, _) =
            sim::simulate_point(&config, Protocol::NcBwt, 1024, p, alpha, &[1, i as u64])
                .map_err(|e| e.to_string())?;
        let expected = n_blocks as f64 / (1.0 - alpha * p) - n_blocks as f64;
        let rel = (mean - expected).abs() / expected;
        worst = worst.max(rel);
        ensure(rel <= 0.10, || {
            format!("NC p={p} alpha={alpha}: {mean:.2} vs {expected:.2}")
        })?;
        summary.push(format!("NC ({p},{alpha}) {mean:.1}/{expected:.1}"));
    }
    Ok(format!(
        "worst relative error {:.2}%: {}",
        worst * 100.0,
        summary.join(", ")
    ))
}

fn decoder_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEC0DE);
    let mut introductions = 0;
    for case in 0..100 {
        let len = rng.random_range(1..=64 * 1024);
        let block = 1usize << rng.random_range(6..=10);
        let p = rng.random_range(0.0..0.6);
        let alpha = rng.random_range(0.05..=1.0);
        let (bytes, resource) = common::random_resource(len, block, rng.random());
        let rebuilt = ncbwt::coding::reassemble(&resource.blocks, resource.original_len);
        ensure(rebuilt == bytes, || {
            format!("case {case}: split/reassemble differs")
        })?;
        let params = ChannelParams::new(p, alpha).map_err(|e| e.to_string())?;
        let mut link = BernoulliLink::new(params, rng.random());
        let opts = RunOptions {
            rlnc_seed: rng.random(),
            ..RunOptions::default()
        };
        let result = sim::run_transfer(Protocol::NcBwt, &resource, &mut link, opts)
            .map_err(|e| format!("case {case} (len {len}, B {block}, p {p:.2}): {e}"))?;
        ensure(result.delivered, || format!("case {case}: not delivered"))?;
        ensure(result.introductions_redundant == 0, || {
            format!(
                "case {case}: {} redundant introductions",
                result.introductions_redundant
            )
        })?;
        introductions += result.introductions_delivered;
    }
    Ok(format!(
        "100 resources byte-identical, {introductions} delivered introductions all innovative"
    ))
}

fn random_request(rng: &mut ChaCha8Rng, kind: CodingKind) -> RequestOption {
    let no_t: u16 = rng.random_range(1..=u16::MAX);
    let max_span = usize::from(u16::MAX - no_t) + 1;
    let span = rng.random_range(1..=max_span.min(300));
    let no_e = no_t + (span - 1) as u16;
    let coeffs = match kind {
        CodingKind::ImplicitXor => Vec::new(),
        CodingKind::ExplicitRlnc => (0..span)
            .map(|i| {
                let lo = if i == 0 || i == span - 1 { 1 } else { 0 };
                Gf256(rng.random_range(lo..=255))
            })
            .collect(),
    };
    RequestOption {
        c_c: rng.random(),
        no_t,
        no_e,
        more: rng.random(),
        szx: rng.random_range(0..=6),
        kind,
        coeffs,
    }
}

fn codec_and_field() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DEC);
    for kind in [CodingKind::ImplicitXor, CodingKind::ExplicitRlnc] {
        for _ in 0..10_000 {
            let opt = random_request(&mut rng, kind);
            let bytes = wire::encode_request(&opt).map_err(|e| e.to_string())?;
            ensure(bytes.len() == opt.encoded_len(), || {
                "length mismatch".into()
            })?;
            let back = wire::decode_request(&bytes).map_err(|e| e.to_string())?;
            ensure(back == opt, || format!("request round trip {opt:?}"))?;
            let again = wire::encode_request(&back).map_err(|e| e.to_string())?;
            ensure(again == bytes, || "re-encoding differs".into())?;
        }
    }
    let mut acks = 0;
    while acks < 10_000 {
        let ack = AckOption {
            c_s: rng.random(),
            sn: rng.random(),
            u: rng.random(),
            rdt_s: rng.random(),
        };
        if ack.validate().is_err() {
            continue;
        }
        let bytes = wire::encode_ack(&ack).map_err(|e| e.to_string())?;
        let back = wire::decode_ack(&bytes).map_err(|e| e.to_string())?;
        ensure(back == ack, || format!("ack round trip {ack:?}"))?;
        ensure(wire::encode_ack(&back).ok() == Some(bytes), || {
            "ack re-encoding differs".into()
        })?;
        acks += 1;
    }
    for a in 0..=255u8 {
        for b in 0..=255u8 {
            let got = gf_mul(Gf256(a), Gf256(b)).0;
            let want = common::clmul_reduce(a, b);
            ensure(got == want, || {
                format!("{a:#04x}*{b:#04x} = {got:#04x}, oracle {want:#04x}")
            })?;
        }
    }
    for a in 1..=255u8 {
        let inv = gf_inv(Gf256(a)).map_err(|e| e.to_string())?;
        ensure(common::clmul_reduce(a, inv.0) == 1, || {
            format!("bad inverse of {a:#04x}")
        })?;
    }
    ensure(gf_inv(Gf256(0)).is_err(), || "zero has an inverse".into())?;
    Ok("2x10^4 request + 10^4 ack round trips, 65536 products, 255 inverses".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("analytic exactness", analytic_exactness),
        ("analytic grid shape", analyze_grid_shape),
        ("scenario golden replay", scenario_golden),
        ("Monte-Carlo agreement", monte_carlo_agreement),
        ("decoder correctness", decoder_correctness),
        ("codec and field suites", codec_and_field),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} [{secs:.2}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.2}s]: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
