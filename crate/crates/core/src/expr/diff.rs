use super::{binary, call, neg, BinOp, Func, RadialExpr};

fn add(a: RadialExpr, b: RadialExpr) -> RadialExpr {
    binary(BinOp::Add, a, b)
}

fn sub(a: RadialExpr, b: RadialExpr) -> RadialExpr {
    binary(BinOp::Sub, a, b)
}

fn mul(a: RadialExpr, b: RadialExpr) -> RadialExpr {
    binary(BinOp::Mul, a, b)
}

fn div(a: RadialExpr, b: RadialExpr) -> RadialExpr {
    binary(BinOp::Div, a, b)
}

fn pow(a: RadialExpr, b: RadialExpr) -> RadialExpr {
    binary(BinOp::Pow, a, b)
}

fn c(v: f64) -> RadialExpr {
    RadialExpr::Const(v)
}

pub(super) fn derivative(e: &RadialExpr) -> RadialExpr {
    match e {
        RadialExpr::Const(_) => c(0.0),
        RadialExpr::Var => c(1.0),
        RadialExpr::Neg(a) => neg(derivative(a)),
        RadialExpr::Call(func, a) => {
            let inner = derivative(a);
            let u = (**a).clone();
            let outer = match func {
                Func::Exp => call(Func::Exp, u),
                Func::Log => div(c(1.0), u),
                Func::Sin => call(Func::Cos, u),
                Func::Cos => neg(call(Func::Sin, u)),
                Func::Sinh => call(Func::Cosh, u),
                Func::Cosh => call(Func::Sinh, u),
                Func::Tanh => sub(c(1.0), pow(call(Func::Tanh, u), c(2.0))),
                Func::Coth => sub(c(1.0), pow(call(Func::Coth, u), c(2.0))),
                Func::Sqrt => div(c(0.5), call(Func::Sqrt, u)),
            };
            mul(outer, inner)
        }
        RadialExpr::Binary(op, a, b) => {
            let (u, v) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(derivative(a), derivative(b)),
                BinOp::Sub => sub(derivative(a), derivative(b)),
                BinOp::Mul => add(mul(derivative(a), v), mul(u, derivative(b))),
                BinOp::Div => {
                    // (u'v - uv') / v^2
                    let num = sub(mul(derivative(a), v.clone()), mul(u, derivative(b)));
                    div(num, pow(v, c(2.0)))
                }
                BinOp::Pow => {
                    if !b.depends_on_r() {
                        // v * u^(v-1) * u'
                        let lowered = sub(v.clone(), c(1.0));
                        mul(mul(v, pow(u, lowered)), derivative(a))
                    } else if !a.depends_on_r() {
                        // u^v * log(u) * v'
                        mul(mul(e.clone(), call(Func::Log, u)), derivative(b))
                    } else {
                        // u^v * (v' log(u) + v u'/u)
                        let log_part = mul(derivative(b), call(Func::Log, u.clone()));
                        let ratio = div(mul(v, derivative(a)), u);
                        mul(e.clone(), add(log_part, ratio))
                    }
                }
            }
        }
    }
}
