use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use synwalk::composition::{nearest_neighbors, CompositionMethod, Composer};
use synwalk::corpus::{self, build_vocabulary, encode_sentence};
use synwalk::error::Checkpoint;
use synwalk::evaluation::{self, FoldSpec, MethodFamily, PhraseSimDataset, PhraseType};
use synwalk::generator::{self, ModelParams};
use synwalk::statistics::{self, BoundednessReport, ConcentrationReport, TuckerCheck};
use synwalk::training::{self, TensorMetadata, TrainConfig, TrainLog};
use synwalk::{cooccur, CpTensor, EmbeddingMatrix, Error, RelationMap, TripleCounts, Vocabulary};

use crate::output::{sidecar, write_atomic, write_json};
use crate::*;

pub fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Ingest(a) => ingest(a),
        Command::Count(a) => count(a),
        Command::TrainEmbeddings(a) => train_embeddings(a),
        Command::TrainTensor(a) => train_tensor(a),
        Command::Verify(a) => verify(a),
        Command::Pmi3Check(a) => pmi3_check(a),
        Command::Compose(a) => compose(a),
        Command::Neighbors(a) => neighbors(a),
        Command::Eval(a) => eval(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_embeddings(path: &Path, emb: &EmbeddingMatrix, words: &[String]) -> CliResult<()> {
    Ok(write_atomic(path, |w| emb.write_text(w, words))?)
}

fn write_tensor(path: &Path, t: &CpTensor) -> CliResult<()> {
    Ok(write_atomic(path, |w| t.write_sct(w))?)
}

fn write_log(path: Option<&PathBuf>, log: &TrainLog) -> CliResult<()> {
    if let Some(p) = path {
        write_atomic(p, |w| log.write_tsv(w))?;
    }
    Ok(())
}

/// Saves the last finite parameters next to `out` before reporting divergence.
fn save_checkpoint(err: Error, out: &Path, words: &[String]) -> CliError {
    if let Error::Diverged { checkpoint, .. } = &err {
        let mut path = out.as_os_str().to_owned();
        path.push(".diverged");
        let path = PathBuf::from(path);
        let saved = match checkpoint.as_ref() {
            Checkpoint::Embeddings(e) => write_embeddings(&path, e, words),
            Checkpoint::Tensor(t) => write_tensor(&path, t),
        };
        match saved {
            Ok(()) => eprintln!("last finite parameters written to {}", path.display()),
            Err(e) => eprintln!("could not write checkpoint: {e}"),
        }
    }
    CliError::Core(err)
}

/// Metadata written next to count files.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CountMetadata {
    anchor: String,
    window: usize,
    relations: String,
    vocab_size: usize,
    #[serde(default)]
    vocab_fingerprint: String,
    sentences: usize,
    tokens: usize,
    pairs_extracted: usize,
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    if a.vocab_size == 0 || a.dim == 0 {
        return Err(usage("--vocab-size and --dim must be positive"));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let params = ModelParams {
        embeddings: generator::init_embeddings(a.vocab_size, a.dim, a.kappa, a.tau, &mut rng)?,
        tensor: generator::random_tensor(a.dim, a.rank, a.tensor_weight, &mut rng)?,
        p_syn: a.p_syn,
        eps_w: a.eps_w,
        kappa: a.kappa,
        tau: a.tau,
    };
    let corpus = generator::generate_corpus_parallel(&params, a.steps, a.segments, a.seed.wrapping_add(1))?;
    let words = generator::synthetic_words(a.vocab_size);
    let parsed = corpus.to_parsed(&words);
    write_atomic(&a.out, |w| corpus::write_conll(w, &parsed))?;
    if let Some(p) = &a.gold {
        write_atomic(p, |w| corpus.write_gold_pairs(w))?;
    }
    if let Some(p) = &a.vocab_out {
        let vocab = corpus.vocabulary(a.vocab_size)?;
        write_atomic(p, |w| vocab.write_tsv(w))?;
    }
    if let Some(p) = &a.emb_out {
        write_embeddings(p, &params.embeddings, &words)?;
    }
    if let Some(p) = &a.tensor_out {
        write_tensor(p, &params.tensor)?;
    }
    eprintln!(
        "{} sentences, {} tokens, {} pairs in {:.1}s",
        corpus.sentences.len(),
        corpus.num_tokens(),
        corpus.num_pairs(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn ingest(a: IngestArgs) -> CliResult<()> {
    load::require_inputs(load::paths(&[&a.corpus], &[&a.stopwords]))?;
    let stop = match &a.stopwords {
        Some(p) => load::stopwords(p)?,
        None => HashSet::new(),
    };
    let vocab = build_vocabulary(load::conll(&a.corpus)?, a.min_count, &stop)?;
    write_atomic(&a.out, |w| vocab.write_tsv(w))?;
    eprintln!("{} words with count >= {}", vocab.len(), a.min_count);
    Ok(())
}

fn tsv_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".tsv");
    PathBuf::from(s)
}

fn count(a: CountArgs) -> CliResult<()> {
    if a.pairs_out.is_none() && a.triples_out.is_none() {
        return Err(usage("nothing to do: give --pairs-out and/or --triples-out"));
    }
    load::require_inputs([a.corpus.as_path(), a.vocab.as_path()])?;
    let relations = match &a.relations {
        Some(s) => RelationMap::parse(s).map_err(|e| usage(e.to_string()))?,
        None => RelationMap::default(),
    };
    let vocab = load::vocab(&a.vocab)?;
    let start = Instant::now();
    let mut encoded = Vec::new();
    let mut tokens = 0;
    for s in load::conll(&a.corpus)? {
        let s = s?;
        tokens += s.len();
        encoded.push(encode_sentence(&s, &vocab, &relations)?);
    }
    let (pairs, triples) = cooccur::count_sharded(&encoded, vocab.len(), a.window, a.threads)?;
    let meta = CountMetadata {
        anchor: cooccur::TRIPLE_ANCHOR.to_string(),
        window: a.window,
        relations: relations.to_spec(),
        vocab_size: vocab.len(),
        vocab_fingerprint: load::vocab_fingerprint(&vocab),
        sentences: encoded.len(),
        tokens,
        pairs_extracted: encoded.iter().map(|s| s.pairs.len()).sum(),
    };
    if let Some(p) = &a.pairs_out {
        write_atomic(p, |w| pairs.write_binary(w))?;
        write_json(&sidecar(p), &meta)?;
        if a.tsv {
            write_atomic(&tsv_path(p), |w| pairs.write_tsv(w, Some(vocab.words())))?;
        }
    }
    if let Some(p) = &a.triples_out {
        write_atomic(p, |w| triples.write_binary(w))?;
        write_json(&sidecar(p), &meta)?;
        if a.tsv {
            write_atomic(&tsv_path(p), |w| triples.write_tsv(w, Some(vocab.words())))?;
        }
    }
    eprintln!(
        "{} sentences, {} pair cells, {} triple cells, {} syntactic pairs in {:.1}s",
        meta.sentences,
        pairs.len(),
        triples.len(),
        meta.pairs_extracted,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn train_config(o: &OptimArgs, dim: usize, rank: usize, joint: bool) -> CliResult<TrainConfig> {
    let config = TrainConfig {
        dim,
        cp_rank: rank,
        cap: o.cap,
        learning_rate: o.learning_rate,
        epochs: o.epochs,
        batch_size: o.batch_size,
        seed: o.seed,
        init_scale: o.init_scale,
        threads: o.threads,
        joint,
        ..TrainConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn report_log(log: &TrainLog) {
    if let (Some(first), Some(last)) = (log.initial_loss(), log.final_loss()) {
        eprintln!("loss {first:.6e} -> {last:.6e} over {} epochs", log.records.len().saturating_sub(1));
    }
}

fn train_embeddings(a: TrainEmbeddingsArgs) -> CliResult<()> {
    load::require_inputs([a.pairs.as_path(), a.vocab.as_path()])?;
    let config = train_config(&a.optim, a.dim, 0, false)?;
    let vocab = load::vocab(&a.vocab)?;
    let counts = load::pair_counts(&a.pairs, &vocab)?;
    let init = training::init_embeddings(vocab.len(), &config)?;
    let (emb, log) = training::train_embeddings_from(init, &counts, &config)
        .map_err(|e| save_checkpoint(e, &a.out, vocab.words()))?;
    write_embeddings(&a.out, &emb, vocab.words())?;
    write_log(a.optim.log.as_ref(), &log)?;
    report_log(&log);
    Ok(())
}

fn read_count_metadata(counts: &Path) -> Option<CountMetadata> {
    let text = std::fs::read_to_string(sidecar(counts)).ok()?;
    serde_json::from_str(&text).ok()
}

fn train_tensor(a: TrainTensorArgs) -> CliResult<()> {
    load::require_inputs([a.triples.as_path(), a.vocab.as_path(), a.emb.as_path()])?;
    if a.joint && a.emb_out.is_none() {
        eprintln!("note: --joint without --emb-out discards the updated embeddings");
    }
    let vocab = load::vocab(&a.vocab)?;
    let emb = load::aligned_embeddings(&a.emb, &vocab)?;
    let config = train_config(&a.optim, emb.dim(), a.rank, a.joint)?;
    let counts = load::triple_counts(&a.triples, &vocab)?;
    let cells = training::triple_cells(&counts);
    let result = training::train_tensor_cells(&cells, &emb, training::init_tensor(&config)?, &config)
        .map_err(|e| save_checkpoint(e, &a.out, vocab.words()))?;
    write_tensor(&a.out, &result.tensor)?;
    let counted = read_count_metadata(&a.triples);
    let meta = TensorMetadata {
        config,
        anchor: counted.as_ref().map_or_else(|| cooccur::TRIPLE_ANCHOR.to_string(), |m| m.anchor.clone()),
        window: counted.as_ref().map_or(synwalk::DEFAULT_WINDOW, |m| m.window),
        relations: counted.map_or_else(|| RelationMap::default().to_spec(), |m| m.relations),
        dim: result.tensor.dim(),
        rank: result.tensor.rank(),
        root_biases: result.tensor.root_bias.len(),
        log: result.log.clone(),
    };
    write_json(&sidecar(&a.out), &meta)?;
    if let (Some(p), Some(e)) = (&a.emb_out, &result.embeddings) {
        write_embeddings(p, e, vocab.words())?;
    }
    write_log(a.optim.log.as_ref(), &result.log)?;
    report_log(&result.log);
    Ok(())
}

/// Embeddings with a matching vocabulary: the given one, or the file's own
/// word list with unit counts.
fn embeddings_and_vocab(emb: &Path, vocab: Option<&PathBuf>) -> CliResult<(EmbeddingMatrix, Vocabulary)> {
    match vocab {
        Some(v) => {
            let vocab = load::vocab(v)?;
            Ok((load::aligned_embeddings(emb, &vocab)?, vocab))
        }
        None => {
            let (words, m) = load::embeddings(emb)?;
            let n = words.len();
            Ok((m, Vocabulary::from_parts(words, vec![1; n], 1)?))
        }
    }
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    partition: ConcentrationReport,
    syntactic: Vec<(String, ConcentrationReport)>,
    boundedness: Option<BoundednessReport>,
}

fn print_concentration(label: &str, r: &ConcentrationReport) {
    println!(
        "{label}\tlog_mean={:.4}\tcv={:.4}\tmin/mean={:.4}\tmax/mean={:.4}",
        r.log_mean, r.coeff_variation, r.min_ratio, r.max_ratio
    );
}

fn verify(a: VerifyArgs) -> CliResult<()> {
    load::require_inputs(load::paths(&[&a.emb], &[&a.tensor, &a.vocab, &a.triples]))?;
    if a.samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let (emb, vocab) = embeddings_and_vocab(&a.emb, a.vocab.as_ref())?;
    let tensor = a.tensor.as_deref().map(load::tensor).transpose()?;
    let triples = a.triples.as_deref().map(|p| load::triple_counts(p, &vocab)).transpose()?;

    let partition = statistics::concentration_report(&emb, None, None, a.samples, a.seed, a.threads)?;
    print_concentration("Z_c", &partition);

    let mut syntactic = Vec::new();
    let mut boundedness = None;
    if let Some(t) = &tensor {
        let roots: Vec<u32> = match &a.roots {
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|w| load::word_id(&vocab, w))
                .collect::<CliResult<_>>()?,
            None => default_roots(triples.as_ref(), vocab.len()),
        };
        for root in roots {
            let r = statistics::concentration_report(&emb, Some(t), Some(root), a.samples, a.seed, a.threads)?;
            let label = format!("Z_c,{}", vocab.word(root));
            print_concentration(&label, &r);
            syntactic.push((vocab.word(root).to_string(), r));
        }
        let pairs = boundedness_pairs(triples.as_ref(), vocab.len(), a.max_pairs, a.seed);
        let b = statistics::boundedness_report(t, &emb, &pairs)?;
        println!(
            "boundedness\tpairs={}\tspectral_max={:.4}\tfrobenius_max={:.4}\tvector_max={:.4}\tK={:.4}\teps={:.4}",
            b.num_pairs, b.spectral.max, b.frobenius.max, b.vector.max, b.k, b.epsilon
        );
        if b.unconverged > 0 {
            eprintln!("{} power iterations hit the iteration cap", b.unconverged);
        }
        if let Some(p) = &a.bounds_tsv {
            write_atomic(p, |w| b.write_tsv(w, Some(vocab.words())))?;
        }
        boundedness = Some(b);
    } else if a.roots.is_some() || a.bounds_tsv.is_some() {
        return Err(usage("--roots and --bounds-tsv need --tensor"));
    }
    if let Some(p) = &a.out {
        write_json(p, &VerifyReport { partition, syntactic, boundedness })?;
    }
    Ok(())
}

/// The three most frequent roots in the triple counts, or the first ids.
fn default_roots(triples: Option<&TripleCounts>, n: usize) -> Vec<u32> {
    let Some(t) = triples else {
        return (0..n.min(3) as u32).collect();
    };
    let mut per_root: BTreeMap<u32, f64> = BTreeMap::new();
    for ((a, _), c) in t.pairs() {
        *per_root.entry(a).or_default() += c;
    }
    let mut ranked: Vec<(u32, f64)> = per_root.into_iter().collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    ranked.into_iter().take(3).map(|(a, _)| a).collect()
}

/// Observed (root, dependent) pairs by decreasing count, or seeded random
/// pairs when no counts are available.
fn boundedness_pairs(triples: Option<&TripleCounts>, n: usize, max: usize, seed: u64) -> Vec<(u32, u32)> {
    match triples {
        Some(t) => {
            let mut seen: Vec<((u32, u32), f64)> = t.pairs().collect();
            seen.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            seen.into_iter().take(max).map(|(p, _)| p).collect()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..max).map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32))).collect()
        }
    }
}

#[derive(Debug, Serialize)]
struct Pmi3Report {
    min_count: f64,
    check: TuckerCheck,
}

fn pmi3_check(a: Pmi3CheckArgs) -> CliResult<()> {
    load::require_inputs([&a.triples, &a.pairs, &a.vocab, &a.emb, &a.tensor].map(PathBuf::as_path))?;
    let vocab = load::vocab(&a.vocab)?;
    let emb = load::aligned_embeddings(&a.emb, &vocab)?;
    let tensor = load::tensor(&a.tensor)?;
    let triples = load::triple_counts(&a.triples, &vocab)?;
    let pairs = load::pair_counts(&a.pairs, &vocab)?;
    let points = statistics::pmi3_points(&tensor, &emb, &triples, &pairs, vocab.counts(), a.min_count)?;
    let check = statistics::summarize_points(&points)?;
    match check.pearson_r {
        Some(r) => println!("pearson_r={r:.4}\trmse={:.4}\ttriples={}", check.rmse, check.num_triples),
        None => println!("pearson_r=undefined\trmse={:.4}\ttriples={}", check.rmse, check.num_triples),
    }
    if let Some(p) = &a.points {
        let words = vocab.words();
        write_atomic(p, |w| {
            writeln!(w, "a\tb\tw\tcount\tempirical\tpredicted")?;
            for q in &points {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    words[q.a as usize], words[q.b as usize], words[q.w as usize], q.count, q.empirical, q.predicted
                )?;
            }
            Ok(())
        })?;
    }
    if let Some(p) = &a.out {
        write_json(p, &Pmi3Report { min_count: a.min_count, check })?;
    }
    Ok(())
}

fn method_for(name: MethodName, a: &ComposeArgs) -> CompositionMethod {
    match name {
        MethodName::Additive => CompositionMethod::Additive,
        MethodName::Weighted => CompositionMethod::WeightedAdditive { beta: a.beta, swap: a.swap },
        MethodName::Tensor => CompositionMethod::Tensor { alpha: a.alpha },
        MethodName::Sif => CompositionMethod::Sif { a: a.sif_a },
        MethodName::SifTensor => CompositionMethod::SifTensor { a: a.sif_a, gamma: a.gamma },
    }
}

fn compose(a: ComposeArgs) -> CliResult<()> {
    load::require_inputs(load::paths(&[&a.emb], &[&a.tensor, &a.vocab]))?;
    let (root, dep) = match (&a.a, &a.b, &a.phrase) {
        (Some(r), Some(d), None) => (r.clone(), d.clone()),
        (None, None, Some(p)) => match p.split_whitespace().collect::<Vec<_>>()[..] {
            [d, r] => (r.to_string(), d.to_string()),
            _ => return Err(usage("--phrase needs exactly two words")),
        },
        _ => return Err(usage("give --a ROOT --b DEPENDENT or --phrase \"W1 W2\"")),
    };
    let name = a.method.unwrap_or(if a.tensor.is_some() { MethodName::Tensor } else { MethodName::Additive });
    let method = method_for(name, &a);
    method.validate().map_err(|e| usage(e.to_string()))?;
    if method.needs_tensor() && a.tensor.is_none() {
        return Err(usage(format!("{method} needs --tensor")));
    }
    if method.is_sif() && a.vocab.is_none() {
        return Err(usage(format!("{method} needs --vocab for word counts")));
    }
    let (emb, vocab) = embeddings_and_vocab(&a.emb, a.vocab.as_ref())?;
    let tensor = a.tensor.as_deref().map(load::tensor).transpose()?;
    let composer = Composer::new(&emb, tensor.as_ref(), Some(&vocab))?;
    let (ra, rb) = (load::word_id(&vocab, &root)?, load::word_id(&vocab, &dep)?);
    let v = composer.compose(ra, rb, &method)?;
    let exclude: HashSet<u32> = if a.keep_constituents { HashSet::new() } else { HashSet::from([ra, rb]) };
    println!("# {dep} {root}: {method}");
    for (id, cos) in nearest_neighbors(&v, &emb, a.neighbors, &exclude)? {
        println!("{}\t{cos:.4}", vocab.word(id));
    }
    Ok(())
}

fn neighbors(a: NeighborsArgs) -> CliResult<()> {
    load::require_inputs([a.emb.as_path()])?;
    let (emb, vocab) = embeddings_and_vocab(&a.emb, None)?;
    let id = load::word_id(&vocab, &a.word)?;
    for (n, cos) in nearest_neighbors(emb.row(id), &emb, a.k, &HashSet::from([id]))? {
        println!("{}\t{cos:.4}", vocab.word(n));
    }
    Ok(())
}

fn family(name: MethodName, a: &EvalArgs) -> MethodFamily {
    match name {
        MethodName::Additive => MethodFamily::Fixed { method: CompositionMethod::Additive },
        MethodName::Weighted => MethodFamily::WeightedAdditive { swap: a.swap },
        MethodName::Tensor => MethodFamily::Tensor,
        MethodName::Sif => MethodFamily::Fixed { method: CompositionMethod::Sif { a: a.sif_a } },
        MethodName::SifTensor => MethodFamily::SifTensor { a: a.sif_a },
    }
}

fn eval(a: EvalArgs) -> CliResult<()> {
    load::require_inputs(load::paths(&[], &[&a.dataset, &a.published, &a.emb, &a.tensor, &a.vocab]))?;
    let mut dataset = match (&a.dataset, &a.published) {
        (Some(p), _) => PhraseSimDataset::read_tsv(std::io::BufReader::new(std::fs::File::open(p)?))?,
        (None, Some(p)) => PhraseSimDataset::read_published(std::io::BufReader::new(std::fs::File::open(p)?))?,
        (None, None) => return Err(usage("give --dataset or --published")),
    };
    if let Some(t) = &a.phrase_type {
        let t: PhraseType = t.parse().map_err(|e: Error| usage(e.to_string()))?;
        dataset = dataset.filter_type(t);
    }
    if let Some(p) = &a.convert_out {
        write_atomic(p, |w| dataset.write_tsv(w))?;
        eprintln!("{} rating rows written to {}", dataset.records.len(), p.display());
    }
    let Some(emb_path) = &a.emb else {
        if a.convert_out.is_some() {
            return Ok(());
        }
        return Err(usage("--emb is required unless only converting"));
    };
    let methods = if a.methods.is_empty() {
        let mut m = vec![MethodName::Additive, MethodName::Weighted];
        if a.tensor.is_some() {
            m.push(MethodName::Tensor);
        }
        m
    } else {
        a.methods.clone()
    };
    if methods.iter().any(|m| matches!(m, MethodName::Tensor | MethodName::SifTensor)) && a.tensor.is_none() {
        return Err(usage("tensor methods need --tensor"));
    }
    if methods.iter().any(|m| matches!(m, MethodName::Sif | MethodName::SifTensor)) && a.vocab.is_none() {
        return Err(usage("sif methods need --vocab for word counts"));
    }
    let (emb, vocab) = embeddings_and_vocab(emb_path, a.vocab.as_ref())?;
    let tensor = a.tensor.as_deref().map(load::tensor).transpose()?;
    let composer = Composer::new(&emb, tensor.as_ref(), Some(&vocab))?;
    let spec = FoldSpec {
        folds: a.folds,
        cheat: a.cheat,
        average_ratings: a.average_ratings,
        zscore: a.zscore,
        ..FoldSpec::default()
    };
    let results = methods
        .iter()
        .map(|&m| evaluation::evaluate(&dataset, &composer, &vocab, &family(m, &a), &spec))
        .collect::<synwalk::Result<Vec<_>>>()?;
    let title = match &a.phrase_type {
        Some(t) => format!("phrase similarity ({t})"),
        None => "phrase similarity".to_string(),
    };
    print!("{}", evaluation::format_table(&title, &results));
    if let Some(p) = &a.out {
        write_json(p, &results)?;
    }
    Ok(())
}
