use gvw::data::BudgetPattern;

/// Parses `const:LEVEL`, `pulse:L1,L2,...:ON:OFF` or `walk:MIN:MAX:SIGMA:HOLD`.
pub fn parse(text: &str) -> Result<BudgetPattern, String> {
    let mut parts = text.split(':');
    let kind = parts.next().unwrap_or_default();
    let fields: Vec<&str> = parts.collect();
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{s}` is not a finite number"))
    };
    let expect = |n: usize, form: &str| {
        if fields.len() == n {
            Ok(())
        } else {
            Err(format!("expected `{form}`, got `{text}`"))
        }
    };
    match kind {
        "const" => {
            expect(1, "const:LEVEL")?;
            Ok(BudgetPattern::Constant {
                level: number(fields[0])?,
            })
        }
        "pulse" => {
            expect(3, "pulse:L1,L2,...:ON:OFF")?;
            let levels = fields[0].split(',').map(number).collect::<Result<Vec<_>, _>>()?;
            Ok(BudgetPattern::PulseTrain {
                levels,
                on: number(fields[1])?,
                off: number(fields[2])?,
            })
        }
        "walk" => {
            expect(4, "walk:MIN:MAX:SIGMA:HOLD")?;
            Ok(BudgetPattern::RandomWalk {
                min: number(fields[0])?,
                max: number(fields[1])?,
                sigma: number(fields[2])?,
                hold: number(fields[3])?,
            })
        }
        _ => Err(format!("unknown budget kind `{kind}` (const, pulse or walk)")),
    }
}
