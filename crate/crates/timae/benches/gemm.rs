use std::time::Instant;

fn bench_f32(m: usize, k: usize, n: usize, reps: usize) -> f64 {
    let a = vec![1.0f32; m * k];
    let b = vec![1.0f32; k * n];
    let mut c = vec![0.0f32; m * n];
    let t = Instant::now();
    for _ in 0..reps {
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0,
                a.as_ptr(), k as isize, 1,
                b.as_ptr(), n as isize, 1,
                0.0,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
    let secs = t.elapsed().as_secs_f64();
    (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / secs / 1e9
}

fn bench_f64(m: usize, k: usize, n: usize, reps: usize) -> f64 {
    let a = vec![1.0f64; m * k];
    let b = vec![1.0f64; k * n];
    let mut c = vec![0.0f64; m * n];
    let t = Instant::now();
    for _ in 0..reps {
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0,
                a.as_ptr(), k as isize, 1,
                b.as_ptr(), n as isize, 1,
                0.0,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
    let secs = t.elapsed().as_secs_f64();
    (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / secs / 1e9
}

fn main() {
    // shapes representative of the model's gemms
    println!("f32 [1200x64 @ 64x256] ffn    : {:.1} GF/s", bench_f32(1200, 64, 256, 200));
    println!("f32 [300x8 @ 8x300] dec scores: {:.1} GF/s", bench_f32(300, 8, 300, 2000));
    println!("f32 [300x300 @ 300x8] dec attnV:{:.1} GF/s", bench_f32(300, 300, 8, 2000));
    println!("f32 [75x16 @ 16x75] enc scores : {:.1} GF/s", bench_f32(75, 16, 75, 5000));
    println!("f32 [512x512 @ 512x512] square : {:.1} GF/s", bench_f32(512, 512, 512, 20));
    println!("f64 [1200x64 @ 64x256] ffn    : {:.1} GF/s", bench_f64(1200, 64, 256, 100));
    println!("f64 [300x8 @ 8x300] dec scores: {:.1} GF/s", bench_f64(300, 8, 300, 1000));
    println!("f64 [512x512 @ 512x512] square : {:.1} GF/s", bench_f64(512, 512, 512, 10));
}
