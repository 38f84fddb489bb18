use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use lwelab_core::attacks::{solve_bkw, BkwParams, GaussSolver, MlSolver};
use lwelab_core::checks::run_checks;
use lwelab_core::crypto::{
    decrypt_bits, encrypt_bits, estimate_decryption_error, gen_params, keygen, subset_sum_distance, Ciphertext,
    CryptoParams, KeyMode, PrivateKey, PublicKey, DEFAULT_EPS_M,
};
use lwelab_core::dgs::{check_shift_invariance, BootstrapSampler};
use lwelab_core::gaussian::{discretized_psi, DiscretePmf};
use lwelab_core::io::{read_jsonl, read_samples, write_jsonl, write_samples, SampleHeader};
use lwelab_core::lattice::{
    babai_nearest_plane, closest_vector_exact, distance, is_lll_reduced, lll_reduce, smoothing_parameter,
    successive_minima, LatticeBasis, LatticePoint, DEFAULT_LLL_DELTA,
};
use lwelab_core::lwe::{discretize_b, sample_lwe, LweParams, Noise, SampleBatch, SampleMode, Solver, VecStream, Verifier};
use lwelab_core::modring::ModVector;
use lwelab_core::worstcase::{
    check_preconditions, closest_dual_vector, default_cvp_solver, givp_from_dgs, hyperplane_escape_rate,
    iterative_descent, CvpInstance, DgsOracle, ExactDgsOracle, DEFAULT_ETA_EPS,
};
use lwelab_core::{rng, Error, Mode, Result};
use serde::{Deserialize, Serialize};

use crate::{
    AttackCmd, BenchArgs, ChecksArgs, Command, Context, CryptoCmd, DgsCmd, GenerateArgs, LatticeCmd, LweCmd,
    ModeArg, WorstcaseCmd,
};

#[derive(Serialize, Deserialize)]
struct KeyPair {
    private: PrivateKey,
    public: PublicKey,
}

#[derive(Serialize)]
struct AttackReport {
    attack: &'static str,
    secret: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    success: Option<bool>,
    samples: usize,
}

fn output(ctx: &Context) -> Result<Box<dyn Write>> {
    Ok(match &ctx.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit<T: Serialize>(ctx: &Context, value: &T) -> Result<()> {
    let mut w = output(ctx)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn emit_lines<T: Serialize>(ctx: &Context, items: &[T]) -> Result<()> {
    let mut w = output(ctx)?;
    write_jsonl(&mut w, items)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("cannot parse {x:?} in {s:?}"))))
        .collect()
}

pub fn run(ctx: &Context, command: Command) -> Result<()> {
    match command {
        Command::Crypto(c) => crypto(ctx, c),
        Command::Lwe(c) => lwe(ctx, c),
        Command::Attack(c) => attack(ctx, c),
        Command::Lattice(c) => lattice(ctx, c),
        Command::Dgs(c) => dgs(ctx, c),
        Command::Worstcase(c) => worstcase(ctx, c),
        Command::Checks(a) => checks(ctx, a),
        Command::Bench(a) => bench(ctx, a),
    }
}

fn crypto(ctx: &Context, cmd: CryptoCmd) -> Result<()> {
    match cmd {
        CryptoCmd::Keygen(a) => {
            let mut params = gen_params(a.n, DEFAULT_EPS_M)?;
            if a.p.is_some() || a.m.is_some() || a.alpha.is_some() {
                params = CryptoParams::custom(
                    a.n,
                    a.p.unwrap_or(params.p),
                    a.m.unwrap_or(params.m),
                    a.alpha.unwrap_or(params.alpha),
                )?;
            }
            let crs = if a.shared {
                params = params.with_mode(KeyMode::Shared);
                Some(a.crs_seed.unwrap_or(ctx.seed))
            } else {
                None
            };
            let (private, public) = keygen(&params, crs, &mut rng::stream(ctx.seed, "keygen", 0))?;
            emit(ctx, &KeyPair { private, public })
        }
        CryptoCmd::Encrypt(a) => {
            let key: KeyPair = read_json(&a.key)?;
            let bits = a
                .bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(Error::Config(format!("--bits must contain only 0 and 1, found {c:?}"))),
                })
                .collect::<Result<Vec<u8>>>()?;
            let cts = encrypt_bits(&key.public, &bits, &mut rng::stream(ctx.seed, "encrypt", 0))?;
            emit_lines(ctx, &cts)
        }
        CryptoCmd::Decrypt(a) => {
            let key: KeyPair = read_json(&a.key)?;
            let cts: Vec<Ciphertext> = read_jsonl(open(&a.input)?)?;
            let bits: String = decrypt_bits(&key.private, &cts)?.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
            emit(ctx, &serde_json::json!({ "bits": bits }))
        }
        CryptoCmd::ErrorRate(a) => {
            let params = gen_params(a.n, DEFAULT_EPS_M)?;
            let stats = estimate_decryption_error(&params, a.trials, ctx.seed)?;
            emit(ctx, &serde_json::json!({ "params": params, "stats": stats }))
        }
        CryptoCmd::Leftover(a) => emit(ctx, &subset_sum_distance(a.p, a.n, a.l, a.trials, ctx.seed)?),
    }
}

fn generate(ctx: &Context, a: GenerateArgs) -> Result<()> {
    let params = match (a.alpha, a.eps) {
        (_, Some(eps)) => {
            if a.p != 2 {
                return Err(Error::Config("--eps is Bernoulli noise and needs --p 2".into()));
            }
            LweParams::discrete(a.n, 2, DiscretePmf::bernoulli(eps)?)?
        }
        (alpha, None) => LweParams::psi(a.n, a.p, alpha.unwrap_or(0.05))?,
    };
    let mode = match a.mode {
        ModeArg::Discrete => SampleMode::Discrete,
        ModeArg::Continuous => SampleMode::Continuous,
        ModeArg::Uniform => SampleMode::Uniform,
    };
    if mode == SampleMode::Continuous && !params.is_continuous() {
        return Err(Error::Config("continuous samples need --alpha noise".into()));
    }
    let mut r = rng::stream(ctx.seed, "lwe-generate", 0);
    let s = ModVector::random(a.n, a.p, &mut r);
    let batch = sample_lwe(&params, &s, mode, a.count, &mut r)?;
    let header = SampleHeader {
        n: a.n,
        p: a.p,
        mode,
        noise: Some(params.noise.clone()),
        secret: (mode != SampleMode::Uniform).then(|| s.entries().to_vec()),
    };
    let mut w = output(ctx)?;
    write_samples(&mut w, &header, &batch)?;
    w.flush()?;
    Ok(())
}

fn lwe(ctx: &Context, cmd: LweCmd) -> Result<()> {
    match cmd {
        LweCmd::Generate(a) => generate(ctx, a),
        LweCmd::Verify(a) => {
            let (header, batch) = read_samples(open(&a.samples)?)?;
            let SampleBatch::Continuous(samples) = batch else {
                return Err(Error::Config("verification needs continuous samples".into()));
            };
            let cand = ModVector::new(parse_list(&a.secret)?, header.p);
            if cand.len() != header.n || cand.entries().iter().any(|&x| x >= header.p) {
                return Err(Error::Config(format!("--secret must have {} entries below {}", header.n, header.p)));
            }
            let v = Verifier { samples: samples.len() };
            let z = v.statistic(&cand, &mut VecStream::new(header.n, header.p, samples))?;
            emit(
                ctx,
                &serde_json::json!({ "statistic": z, "accept": z > lwelab_core::lwe::VERIFY_THRESHOLD, "samples": v.samples }),
            )
        }
    }
}

/// Residue samples from a file, rounding continuous ones.
fn discrete_samples(path: &Path) -> Result<(SampleHeader, Vec<lwelab_core::lwe::DiscreteSample>)> {
    let (header, batch) = read_samples(open(path)?)?;
    let samples = match batch {
        SampleBatch::Discrete(v) => v,
        SampleBatch::Continuous(v) => v
            .into_iter()
            .map(|x| lwelab_core::lwe::LweSample { b: discretize_b(x.b, header.p), a: x.a })
            .collect(),
    };
    Ok((header, samples))
}

fn attack(ctx: &Context, cmd: AttackCmd) -> Result<()> {
    let mut r = rng::stream(ctx.seed, "attack", 0);
    let (name, header, found, used) = match cmd {
        AttackCmd::Ml(a) => {
            let (header, samples) = discrete_samples(&a.samples)?;
            let chi = match &header.noise {
                Some(Noise::Discrete { pmf }) => pmf.clone(),
                Some(Noise::Psi { beta }) => discretized_psi(*beta, header.p)?,
                None => return Err(Error::Config("the sample header must name the noise law".into())),
            };
            let count = samples.len();
            let s = MlSolver::new(chi, count).solve(&mut VecStream::new(header.n, header.p, samples), &mut r)?;
            ("ml", header, s, count)
        }
        AttackCmd::Gauss(a) => {
            let (header, samples) = discrete_samples(&a.samples)?;
            let count = samples.len();
            let mut stream = VecStream::new(header.n, header.p, samples);
            let s = GaussSolver::new(header.n, a.trials).solve(&mut stream, &mut r)?;
            let used = count - stream.remaining();
            ("gauss", header, s, used)
        }
        AttackCmd::Bkw(a) => {
            let (header, samples) = discrete_samples(&a.samples)?;
            let count = samples.len();
            let params = BkwParams::new(header.n, a.b, count)?;
            let mut stream = VecStream::new(header.n, header.p, samples);
            let s = solve_bkw(&mut stream, &params)?;
            let used = count - stream.remaining();
            ("bkw", header, s, used)
        }
    };
    let success = header.secret.as_ref().map(|s| s.as_slice() == found.entries());
    emit(
        ctx,
        &AttackReport {
            attack: name,
            secret: found.entries().to_vec(),
            success,
            samples: used,
        },
    )
}

fn load_basis(path: &Path) -> Result<LatticeBasis> {
    read_json(path)
}

fn lattice(ctx: &Context, cmd: LatticeCmd) -> Result<()> {
    match cmd {
        LatticeCmd::Info(a) => {
            let b = load_basis(&a.lattice)?;
            let (l1, ln) = successive_minima(&b)?;
            emit(
                ctx,
                &serde_json::json!({
                    "n": b.dim(),
                    "det": b.det(),
                    "lambda_1": l1,
                    "lambda_n": ln,
                    "eps": a.eps,
                    "eta": smoothing_parameter(&b, a.eps)?,
                    "lll_reduced": is_lll_reduced(&b, DEFAULT_LLL_DELTA),
                }),
            )
        }
        LatticeCmd::Reduce(a) => emit(ctx, &lll_reduce(&load_basis(&a.lattice)?, DEFAULT_LLL_DELTA)?),
        LatticeCmd::Cvp(a) => {
            let b = load_basis(&a.lattice)?;
            let x: Vec<f64> = parse_list(&a.target)?;
            if x.len() != b.dim() {
                return Err(Error::Config(format!("--target needs {} coordinates", b.dim())));
            }
            let exact = closest_vector_exact(&b, &x)?;
            let babai_vec = babai_nearest_plane(&lll_reduce(&b, DEFAULT_LLL_DELTA)?, &x).vector;
            let babai = LatticePoint {
                coeffs: b
                    .integer_coefficients(&babai_vec, 1e-6)
                    .ok_or_else(|| Error::Domain("Babai output is not a lattice point".into()))?,
                vector: babai_vec,
            };
            emit(
                ctx,
                &serde_json::json!({
                    "distance": distance(&exact.vector, &x),
                    "closest": exact,
                    "babai_distance": distance(&babai.vector, &x),
                    "babai": babai,
                }),
            )
        }
    }
}

fn dgs(ctx: &Context, cmd: DgsCmd) -> Result<()> {
    match cmd {
        DgsCmd::Sample(a) => {
            let b = load_basis(&a.lattice)?;
            let mut r = rng::stream(ctx.seed, "dgs", 0);
            let points: Vec<LatticePoint> = if a.bootstrap {
                let s = BootstrapSampler::new(&b, a.r, ctx.mode)?;
                (0..a.count).map(|_| s.sample(&mut r)).collect()
            } else {
                let mut o = ExactDgsOracle::new(b);
                (0..a.count).map(|_| o.sample(a.r, &mut r)).collect::<Result<_>>()?
            };
            emit_lines(ctx, &points)
        }
        DgsCmd::ShiftCheck(a) => {
            let b = load_basis(&a.lattice)?;
            let c: Vec<f64> = parse_list(&a.shift)?;
            if c.len() != b.dim() {
                return Err(Error::Config(format!("--shift needs {} coordinates", b.dim())));
            }
            let chk = check_shift_invariance(&b, &c, a.r, a.eps)?;
            if ctx.mode == Mode::Strict && !chk.precondition_met {
                return Err(Error::Precondition(format!("r = {} is below eta_eps = {}", a.r, chk.eta)));
            }
            emit(ctx, &chk)
        }
    }
}

fn worstcase(ctx: &Context, cmd: WorstcaseCmd) -> Result<()> {
    let mut r = rng::stream(ctx.seed, "worstcase", 0);
    match cmd {
        WorstcaseCmd::Cvp(a) => {
            let dual = load_basis(&a.lattice)?;
            let x: Vec<f64> = parse_list(&a.target)?;
            if x.len() != dual.dim() {
                return Err(Error::Config(format!("--target needs {} coordinates", dual.dim())));
            }
            let d = a.alpha * a.p as f64 / (2f64.sqrt() * a.r);
            let inst = CvpInstance::new(dual, x, d)?;
            let pre = check_preconditions(&inst, a.r, a.p, a.alpha, DEFAULT_ETA_EPS)?;
            let mut oracle = ExactDgsOracle::new(inst.primal()?);
            let solver = default_cvp_solver(a.p, a.alpha, a.m)?;
            let out = closest_dual_vector(&inst, &mut oracle, a.r, a.p, a.alpha, &solver, ctx.mode, &mut r)?;
            emit(ctx, &serde_json::json!({ "promise_radius": d, "preconditions": pre, "outcome": out }))
        }
        WorstcaseCmd::Givp(a) => {
            let b = load_basis(&a.lattice)?;
            let phi = match a.phi {
                Some(phi) => phi,
                None => 2f64.sqrt() * smoothing_parameter(&b, 0.1)?,
            };
            let mut oracle = ExactDgsOracle::new(b.clone());
            let out = givp_from_dgs(&b, &mut oracle, phi, &mut r)?;
            emit(ctx, &serde_json::json!({ "phi": phi, "outcome": out }))
        }
        WorstcaseCmd::Escape(a) => {
            let b = load_basis(&a.lattice)?;
            let h = vec![b.column(0)];
            let mut oracle = ExactDgsOracle::new(b);
            emit(ctx, &hyperplane_escape_rate(&mut oracle, a.r, &h, a.trials, ctx.mode, &mut r)?)
        }
        WorstcaseCmd::Descent(a) => {
            let b = load_basis(&a.lattice)?;
            emit(ctx, &iterative_descent(&b, a.p, a.alpha, a.r, a.steps, a.trials, a.m, &mut r)?)
        }
    }
}

fn checks(ctx: &Context, a: ChecksArgs) -> Result<()> {
    let report = run_checks(&a.selection, ctx.seed)?;
    for c in &report {
        eprintln!(
            "{} {:>2} {:<20} {:.6} {} {:.6}  {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.number,
            c.check_id,
            c.measured,
            c.relation,
            c.bound,
            c.detail
        );
    }
    emit(ctx, &report)
}

fn bench(ctx: &Context, a: BenchArgs) -> Result<()> {
    let params = gen_params(a.n, DEFAULT_EPS_M)?;
    let mut r = rng::stream(ctx.seed, "bench", 0);
    let trials = a.trials.max(1);
    let t = Instant::now();
    let keys: Vec<_> = (0..trials).map(|_| keygen(&params, None, &mut r)).collect::<Result<_>>()?;
    let keygen_us = t.elapsed().as_secs_f64() * 1e6 / trials as f64;
    let t = Instant::now();
    let cts: Vec<_> = keys
        .iter()
        .map(|(_, pk)| encrypt_bits(pk, &[1], &mut r))
        .collect::<Result<_>>()?;
    let encrypt_us = t.elapsed().as_secs_f64() * 1e6 / trials as f64;
    let t = Instant::now();
    for ((sk, _), ct) in keys.iter().zip(&cts) {
        decrypt_bits(sk, ct)?;
    }
    let decrypt_us = t.elapsed().as_secs_f64() * 1e6 / trials as f64;
    emit(
        ctx,
        &serde_json::json!({
            "n": params.n, "p": params.p, "m": params.m, "trials": trials,
            "keygen_us": keygen_us, "encrypt_us": encrypt_us, "decrypt_us": decrypt_us,
        }),
    )
}
