//! Word-pooled contrastive loss with its analytic gradient checked against
//! central differences.

use simulst::losses::{group_words, masked_ce_grad, waco_loss, waco_loss_grad, WordAlignment, WordSpan};
use simulst::tensor::{finite_diff_grad, Initializer};
use simulst::Matrix;

fn span(word: &str, s: (usize, usize), t: (usize, usize)) -> WordSpan {
    WordSpan {
        word: word.into(),
        speech_start: s.0,
        speech_end: s.1,
        text_start: t.0,
        text_end: t.1,
    }
}

fn main() -> simulst::Result<()> {
    let mut init = Initializer::new(3);
    let speech: Matrix<f64> = init.uniform(9, 6, 1.0);
    let text: Matrix<f64> = init.uniform(5, 6, 1.0);
    let alignment = WordAlignment {
        words: vec![span("el", (0, 2), (0, 1)), span("gato", (2, 6), (1, 3)), span("negro", (6, 9), (3, 5))],
    };
    alignment.validate(speech.rows(), text.rows())?;
    let ws = group_words(&speech, &alignment.speech_ranges())?;
    let wt = group_words(&text, &alignment.text_ranges())?;

    let tau = 0.2;
    let g = waco_loss_grad(&ws, &wt, tau)?;
    let fd = finite_diff_grad(|s| waco_loss(s, &wt, tau), &ws, 1e-6)?;
    println!("loss {:.6}, speech gradient max diff {:e}", g.loss, g.grad_speech.max_abs_diff(&fd));

    let logits: Matrix<f64> = init.uniform(4, 10, 3.0);
    let (ce, grad) = masked_ce_grad(&logits, &[1, 4, 4, 9])?;
    println!("cross-entropy {ce:.6}, gradient row sums {:?}", grad.iter_rows().map(|r| r.iter().sum::<f64>()).collect::<Vec<_>>());
    Ok(())
}
