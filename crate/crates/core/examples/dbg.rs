use unroll::presets;
use unroll::rulings::RulingField;
use unroll::tol::Tolerances;
use unroll::immersion::build_immersion;

fn main() {
    let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
    let field = RulingField::compute(&p.framed, &p.region, 1024, &Tolerances::analytic());
    for iv in &field.intervals {
        println!("interval a={:.9} b={:.9}", iv.a, iv.b);
    }
    for g in &field.gaps {
        println!("gap a={:.9} b={:.9} len={:.9}", g.a, g.b, g.len);
    }
    match build_immersion(&p.framed, &p.region, &field) {
        Ok(imm) => println!("ok: {} cells, {} planar", imm.cells_len(), imm.planar.len()),
        Err(e) => println!("ERR {e:?}"),
    }
    // probe n' along gap samples
    for g in &field.gaps {
        let len = p.framed.len();
        let span = if g.b >= g.a { g.b - g.a } else { g.b + len - g.a };
        for k in 0..=4 {
            let alpha = g.a + span * k as f64 / 4.0;
            let n1 = p.framed.normal.deriv(alpha).norm();
            println!("  gap sample alpha={alpha:.9} corner={} |n'|={n1:.3e}", p.framed.curve.is_corner(alpha));
        }
    }
}
