use proptest::prelude::*;
use quizsmith::corpus::QaPair;
use quizsmith::text_metrics::{
    lcs_len, rouge_combined, rouge_l, rouge_multi, rouge_n, rouge_qag, tokenize, MetricsError, QaSplitConfig,
    RougeVariant, TokenSeq,
};

fn seq(words: &[&str]) -> TokenSeq {
    TokenSeq::from_tokens(words.iter().copied())
}

fn f1(p: f64, r: f64) -> f64 {
    if p == 0.0 || r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Clipped overlap by listing every n-gram and consuming matches one by one.
fn brute_rouge_n(c: &[String], r: &[String], n: usize) -> (f64, f64, f64) {
    let grams = |s: &[String]| -> Vec<Vec<String>> {
        if s.len() < n {
            Vec::new()
        } else {
            (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
        }
    };
    let cg = grams(c);
    let mut rg: Vec<Option<Vec<String>>> = grams(r).into_iter().map(Some).collect();
    let mut overlap = 0;
    for g in &cg {
        if let Some(slot) = rg.iter_mut().find(|x| x.as_ref() == Some(g)) {
            *slot = None;
            overlap += 1;
        }
    }
    let p = if cg.is_empty() {
        0.0
    } else {
        overlap as f64 / cg.len() as f64
    };
    let rc = if rg.is_empty() {
        0.0
    } else {
        overlap as f64 / rg.len() as f64
    };
    (p, rc, f1(p, rc))
}

/// Longest common subsequence by trying every subsequence of the shorter side.
fn brute_lcs(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let is_subseq = |sub: &[&String]| {
        let mut it = long.iter();
        sub.iter().all(|x| it.any(|y| y == *x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let ones = mask.count_ones() as usize;
        if ones <= best {
            continue;
        }
        let sub: Vec<&String> = (0..short.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &short[i])
            .collect();
        if is_subseq(&sub) {
            best = ones;
        }
    }
    best
}

fn tokens() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]), 0..=12)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn rouge_n_matches_enumeration(c in tokens(), r in tokens(), n in 1usize..=3) {
        let got = rouge_n(&TokenSeq::from_tokens(c.clone()), &TokenSeq::from_tokens(r.clone()), n).unwrap();
        let (p, rc, f) = brute_rouge_n(&c, &r, n);
        prop_assert!((got.precision - p).abs() < 1e-12);
        prop_assert!((got.recall - rc).abs() < 1e-12);
        prop_assert!((got.f1 - f).abs() < 1e-12);
    }

    #[test]
    fn lcs_matches_exhaustive(c in tokens(), r in tokens()) {
        prop_assert_eq!(lcs_len(&c, &r), brute_lcs(&c, &r));
    }

    #[test]
    fn scores_are_bounded_and_symmetric(c in tokens(), r in tokens(), n in 1usize..=2) {
        let (ct, rt) = (TokenSeq::from_tokens(c), TokenSeq::from_tokens(r));
        let a = rouge_n(&ct, &rt, n).unwrap();
        let b = rouge_n(&rt, &ct, n).unwrap();
        for s in [a, b, rouge_l(&ct, &rt)] {
            prop_assert!((0.0..=1.0).contains(&s.precision));
            prop_assert!((0.0..=1.0).contains(&s.recall));
            prop_assert!((0.0..=1.0).contains(&s.f1));
            if s.precision == 0.0 || s.recall == 0.0 {
                prop_assert_eq!(s.f1, 0.0);
            }
        }
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
        prop_assert_eq!(a.f1, b.f1);
    }

    #[test]
    fn multi_reference_dominates(c in tokens(), refs in prop::collection::vec(tokens(), 1..5)) {
        let ct = TokenSeq::from_tokens(c);
        let rts: Vec<TokenSeq> = refs.into_iter().map(TokenSeq::from_tokens).collect();
        for variant in [RougeVariant::ROUGE_1, RougeVariant::ROUGE_2, RougeVariant::L] {
            let best = rouge_multi(&ct, &rts, variant).unwrap();
            for r in &rts {
                prop_assert!(best.f1 >= variant.score(&ct, r).unwrap().f1);
            }
        }
    }

    #[test]
    fn qag_bounded_by_components(
        q in tokens(), a in tokens(), rq in tokens(), ra in tokens()
    ) {
        let cfg = QaSplitConfig::default();
        let pred = format!("{} <sep> {}", q.join(" "), a.join(" "));
        let reference = QaPair::new(rq.join(" "), ra.join(" "));
        for variant in [RougeVariant::ROUGE_1, RougeVariant::ROUGE_2, RougeVariant::L] {
            let qf = variant.score(&tokenize(&q.join(" ")), &tokenize(&reference.question)).unwrap().f1;
            let af = variant.score(&tokenize(&a.join(" ")), &tokenize(&reference.answer)).unwrap().f1;
            let s = rouge_qag(&pred, std::slice::from_ref(&reference), variant, &cfg).unwrap();
            prop_assert!(s <= qf.max(af) + 1e-15);
            prop_assert_eq!(s == 0.0, qf == 0.0 || af == 0.0);
        }
    }
}

#[test]
fn tokenizer_examples() {
    assert!(tokenize("").is_empty());
    assert_eq!(tokenize("The cat's mat."), seq(&["the", "cat", "s", "mat"]));
    assert_eq!(tokenize("COVID-19 cases"), seq(&["covid", "19", "cases"]));
}

#[test]
fn rouge_n_examples() {
    let c = seq(&["the", "cat", "sat", "on", "the", "mat"]);
    let r = seq(&["the", "cat", "lay", "on", "a", "mat"]);
    let s = rouge_n(&c, &r, 1).unwrap();
    assert!((s.precision - 4.0 / 6.0).abs() < 1e-12);
    assert!((s.recall - 4.0 / 6.0).abs() < 1e-12);
    assert!((s.f1 - 4.0 / 6.0).abs() < 1e-12);
    let same = rouge_n(&c, &c, 2).unwrap();
    assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
    let disjoint = rouge_n(&seq(&["x"]), &seq(&["y"]), 1).unwrap();
    assert_eq!(disjoint.f1, 0.0);
    assert_eq!(rouge_n(&c, &r, 0), Err(MetricsError::ZeroOrder));
}

#[test]
fn rouge_l_examples() {
    let s = rouge_l(&seq(&["a", "b", "c", "d"]), &seq(&["a", "c", "b", "d"]));
    assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
    assert_eq!(rouge_l(&seq(&[]), &seq(&["a"])).f1, 0.0);
}

#[test]
fn rouge_multi_examples() {
    let c = seq(&["the", "cat", "sat", "on", "the", "mat"]);
    let r1 = seq(&["the", "cat", "lay", "on", "a", "mat"]);
    let r2 = seq(&["the", "dog", "ran", "to", "a", "mat"]);
    let best = rouge_multi(&c, &[r2.clone(), r1.clone()], RougeVariant::ROUGE_1).unwrap();
    assert!((best.f1 - 4.0 / 6.0).abs() < 1e-12);
    assert!((rouge_n(&c, &r2, 1).unwrap().f1 - 2.0 / 6.0).abs() < 1e-12);
    let exact = rouge_multi(&c, &[seq(&["zzz"]), c.clone()], RougeVariant::ROUGE_2).unwrap();
    assert_eq!(exact.f1, 1.0);
    assert_eq!(rouge_multi(&c, &[], RougeVariant::L), Err(MetricsError::NoReferences));
}

#[test]
fn rouge_qag_examples() {
    let cfg = QaSplitConfig::default();
    let refs = [QaPair::new("who won the race", "the red team")];
    assert_eq!(
        rouge_qag("who won the race the red team", &refs, RougeVariant::ROUGE_1, &cfg).unwrap(),
        0.0
    );
    let half = rouge_qag("who won the race <sep> red", &refs, RougeVariant::ROUGE_1, &cfg).unwrap();
    // question F = 1, answer P = 1, R = 1/3, F = 1/2
    assert!((half - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(
        rouge_qag("who won the race <sep> blue", &refs, RougeVariant::ROUGE_1, &cfg).unwrap(),
        0.0
    );
    assert_eq!(
        rouge_qag("x <sep> y", &[], RougeVariant::L, &cfg),
        Err(MetricsError::NoReferences)
    );
    // split happens at the first separator only
    let twice = rouge_qag(
        "who won the race <sep> the red <sep> team",
        &refs,
        RougeVariant::ROUGE_1,
        &cfg,
    )
    .unwrap();
    assert!(twice > 0.0 && twice < 1.0);
}

#[test]
fn qag_separates_what_combined_rouge_blurs() {
    let cfg = QaSplitConfig::default();
    let refs = [QaPair::new(
        "Which party won control of the state senate in the November election?",
        "the democratic party",
    )];
    let pred = "Which party won control of the state senate in the November election? <sep> republicans";
    let combined = rouge_combined(pred, &refs, RougeVariant::ROUGE_2, &cfg).unwrap();
    let qag = rouge_qag(pred, &refs, RougeVariant::ROUGE_2, &cfg).unwrap();
    assert!(combined > 0.3, "combined = {combined}");
    assert_eq!(qag, 0.0);
}

#[test]
fn custom_separator() {
    let cfg = QaSplitConfig::new("||").unwrap();
    let refs = [QaPair::new("what color", "blue")];
    assert_eq!(
        rouge_qag("what color || blue", &refs, RougeVariant::L, &cfg).unwrap(),
        1.0
    );
    assert_eq!(QaSplitConfig::new(""), Err(MetricsError::EmptySeparator));
}

#[test]
fn multiset_counting_is_clipped() {
    let s = rouge_n(&seq(&["a", "a", "a"]), &seq(&["a"]), 1).unwrap();
    assert!((s.precision - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.recall, 1.0);
}
