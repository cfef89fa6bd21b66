//! Reverse-mode gradients of a tiny two-layer network.

use fraudlens::autodiff::{softmax_rows, xavier_init, Adam, Tape, Tensor};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // XOR with a 2-8-2 network.
    let x = Tensor::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
    let y = [0usize, 1, 1, 0];
    let mut params = vec![
        xavier_init(2, 8, 1),
        Tensor::zeros(1, 8),
        xavier_init(8, 2, 2),
        Tensor::zeros(1, 2),
    ];
    let mut adam = Adam::new(0.05);
    for step in 0..=300 {
        let mut tape = Tape::new();
        let p: Vec<_> = params.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let input = tape.constant(x.clone());
        let h = tape.matmul(input, p[0]);
        let h = tape.add(h, p[1]);
        let h = tape.tanh(h);
        let o = tape.matmul(h, p[2]);
        let o = tape.add(o, p[3]);
        let loss = tape.cross_entropy(o, &y, None);
        if step % 100 == 0 {
            let probs = softmax_rows(tape.value(o));
            let p1: Vec<String> = (0..4).map(|r| format!("{:.3}", probs.get(r, 1))).collect();
            println!("step {step:>3}  loss {:.4}  p(1) = [{}]", tape.value(loss).item(), p1.join(", "));
        }
        let mut grads = tape.backward(loss)?;
        let g: Vec<Tensor> = p.iter().map(|&v| grads.take(v).unwrap()).collect();
        adam.step(&mut params, &g)?;
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
