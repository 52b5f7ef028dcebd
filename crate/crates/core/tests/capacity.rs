//! Memorization capacity: the seq2seq model must overfit a small corpus of
//! distinct pairs under plain full-batch descent. The membership attack
//! relies on exactly this associative behavior.

use dpgran_core::models::TinySeq2Seq;
use dpgran_core::text::EOS;

#[test]
fn memorizes_64_pairs_within_2000_full_batch_steps() {
    // 64 distinct key→value pairs with tokens private to each pair:
    // one source token, two target tokens plus <eos>.
    let n_pairs = 64usize;
    let v_src = 4 + n_pairs;
    let v_tgt = 4 + 2 * n_pairs;
    let pairs: Vec<(Vec<u32>, Vec<u32>)> = (0..n_pairs as u32)
        .map(|i| {
            (
                vec![4 + i],
                vec![4 + 2 * i, 4 + 2 * i + 1, EOS],
            )
        })
        .collect();

    let model = TinySeq2Seq::new(v_src, v_tgt, 16).unwrap();
    let mut theta = model.init_params(0);
    let mut grad = vec![0.0; model.param_len()];
    let mut mean = vec![0.0; model.param_len()];
    let mut converged_at = None;

    for step in 0..2000 {
        mean.fill(0.0);
        let mut loss = 0.0;
        for (src, tgt) in &pairs {
            loss += model.grad(&theta, src, tgt, &mut grad).unwrap();
            for (m, g) in mean.iter_mut().zip(&grad) {
                *m += g / n_pairs as f64;
            }
        }
        loss /= n_pairs as f64;
        if loss < 0.1 {
            converged_at = Some(step);
            break;
        }
        for (t, m) in theta.iter_mut().zip(&mean) {
            *t -= 0.5 * m;
        }
    }

    let step = converged_at.expect("mean loss still >= 0.1 after 2000 full-batch steps");
    assert!(step < 2000);

    // memorized pairs decode exactly
    for (src, tgt) in pairs.iter().take(8) {
        let decoded = model.greedy_decode(&theta, src, 8).unwrap();
        assert_eq!(&decoded, &tgt[..tgt.len() - 1], "src {src:?} not memorized");
    }
}
