#!/usr/bin/env python3
"""Build the bundled synthetic CRC network (crates/core/data/crc_model.json).

The topology follows the originating risk network: demographic roots (Sex,
Age), socio-economic status, lifestyle factors, BMI, mental-health nodes,
medical conditions, and the CRC target. The real conditional tables are not
public, so every table here is synthetic.

The CRC table is a constrained multiplicative risk model:

    p(CRC | parents) = base[age][sex] * RR(BMI) * RR(PA) * RR(Smoking)
                       * RR(Alcohol) * RR(Diabetes) * RR(Hypertension)

with every risk ratio equal to 1 at the reference level (normal BMI, active,
never smoker, low alcohol, no diabetes, no hypertension). Because all CRC
parents are observed in the reference profiles, the constraints below fix
the free parameters in closed form:

    benchmark (male, 44-54, reference levels)            -> 0.00085082
    benchmark + diabetes + hypertension                    -> 0.0039
    male, 54-64, reference levels                          -> 0.0022
    male, 44-54, overweight, inactive, ex-smoker, high alc -> 0.0018

0.00085082 is the benchmark posterior quoted as 0.00085; the extra digits
make the colonoscopy-positive information value equal 654.93.

Usage: python3 tools/build_crc_model.py [output-path]
"""

import json
import itertools
import sys
from pathlib import Path

BENCHMARK = 0.00085082
TARGET_DIAB_HTN = 0.0039
TARGET_AGE_54_64 = 0.0022
TARGET_LIFESTYLE = 0.0018

SEX = ["male", "female"]
AGE = ["18-34", "34-44", "44-54", "54-64", "64+"]
TRI_SES = ["low", "medium", "high"]
BIN = ["no", "yes"]


def fitted_risk_ratios():
    rr_diabetes = 2.2
    rr_hypertension = TARGET_DIAB_HTN / (BENCHMARK * rr_diabetes)
    rr_overweight = 1.25
    rr_inactive = 1.15
    rr_alcohol_high = 1.3
    rr_ex_smoker = TARGET_LIFESTYLE / (BENCHMARK * rr_overweight * rr_inactive * rr_alcohol_high)
    return {
        "BMI": {"underweight": 1.0, "normal": 1.0, "overweight": rr_overweight, "obese": 1.55},
        "PA": {"active": 1.0, "inactive": rr_inactive},
        "Smoking": {"never": 1.0, "ex": rr_ex_smoker, "current": 1.45},
        "Alcohol": {"low": 1.0, "high": rr_alcohol_high},
        "Diabetes": {"no": 1.0, "yes": rr_diabetes},
        "Hypertension": {"no": 1.0, "yes": rr_hypertension},
    }


def base_risk(age, sex):
    male = {
        "18-34": 0.00004,
        "34-44": 0.00018,
        "44-54": BENCHMARK,
        "54-64": TARGET_AGE_54_64,
        "64+": 0.0042,
    }[age]
    return male if sex == "male" else 0.65 * male


def table(child_states, parents, fn):
    """Flatten fn(parent_labels) -> distribution; last parent varies fastest."""
    out = []
    for combo in itertools.product(*[states for _, states in parents]):
        row = fn(dict(zip([name for name, _ in parents], combo)))
        assert len(row) == len(child_states)
        total = sum(row)
        row = [r / total for r in row]
        out.extend(round(r, 12) for r in row)
    return out


def binary(p):
    return [1.0 - p, p]


def clamp(x, lo=0.001, hi=0.999):
    return max(lo, min(hi, x))


def age_index(age):
    return AGE.index(age)


def build():
    states = {
        "Sex": SEX,
        "Age": AGE,
        "SES": TRI_SES,
        "PA": ["active", "inactive"],
        "Sleep": ["short", "normal", "long"],
        "Alcohol": ["low", "high"],
        "Smoking": ["never", "ex", "current"],
        "BMI": ["underweight", "normal", "overweight", "obese"],
        "Anxiety": BIN,
        "Depression": BIN,
        "Hypercholesterolemia": BIN,
        "Hypertension": BIN,
        "Diabetes": BIN,
        "CRC": BIN,
    }
    parents = {
        "Sex": [],
        "Age": [],
        "SES": ["Age"],
        "PA": ["Sex", "Age"],
        "Sleep": ["Age", "SES"],
        "Alcohol": ["Sex", "SES"],
        "Smoking": ["Sex", "Age", "SES"],
        "BMI": ["Sex", "Age", "PA", "Sleep"],
        "Anxiety": ["Sex", "SES"],
        "Depression": ["Sex", "Anxiety", "Sleep"],
        "Hypercholesterolemia": ["Age", "BMI", "PA"],
        "Hypertension": ["Age", "BMI", "Alcohol", "Smoking"],
        "Diabetes": ["Age", "BMI", "PA"],
        "CRC": ["Age", "Sex", "BMI", "PA", "Smoking", "Alcohol", "Diabetes", "Hypertension"],
    }
    rr = fitted_risk_ratios()

    def f_sex(_):
        return [0.56, 0.44]

    def f_age(_):
        return [0.25, 0.29, 0.28, 0.145, 0.035]

    def f_ses(e):
        a = age_index(e["Age"])
        high = 0.15 + 0.04 * a
        low = 0.35 - 0.04 * a
        return [low, 1.0 - low - high, high]

    def f_pa(e):
        p = 0.38 + 0.05 * age_index(e["Age"]) + (0.05 if e["Sex"] == "female" else 0.0)
        return [1.0 - p, p]

    def f_sleep(e):
        short = 0.22 + (0.06 if e["SES"] == "low" else 0.0) + 0.01 * age_index(e["Age"])
        long = 0.06 + 0.01 * age_index(e["Age"])
        return [short, 1.0 - short - long, long]

    def f_alcohol(e):
        p = 0.18 if e["Sex"] == "male" else 0.07
        p += {"low": 0.03, "medium": 0.0, "high": 0.02}[e["SES"]]
        return binary(p)

    def f_smoking(e):
        a = age_index(e["Age"])
        current = 0.24 - 0.02 * a + (0.06 if e["SES"] == "low" else 0.0)
        current -= 0.03 if e["Sex"] == "female" else 0.0
        ex = 0.08 + 0.05 * a
        return [1.0 - current - ex, ex, current]

    def f_bmi(e):
        a = age_index(e["Age"])
        over = 0.28 + 0.03 * a + (0.08 if e["Sex"] == "male" else 0.0)
        obese = 0.08 + 0.025 * a
        if e["PA"] == "inactive":
            over += 0.04
            obese += 0.06
        if e["Sleep"] == "short":
            obese += 0.03
        under = 0.02 if e["Sex"] == "male" else 0.04
        return [under, 1.0 - under - over - obese, over, obese]

    def f_anxiety(e):
        p = 0.08 + (0.05 if e["Sex"] == "female" else 0.0) + (0.03 if e["SES"] == "low" else 0.0)
        return binary(p)

    def f_depression(e):
        p = 0.04 + (0.02 if e["Sex"] == "female" else 0.0)
        p += 0.18 if e["Anxiety"] == "yes" else 0.0
        p += 0.03 if e["Sleep"] != "normal" else 0.0
        return binary(p)

    bmi_bump = {"underweight": 0.0, "normal": 0.0, "overweight": 0.05, "obese": 0.12}

    def f_chol(e):
        p = 0.05 + 0.05 * age_index(e["Age"]) + bmi_bump[e["BMI"]]
        p += 0.03 if e["PA"] == "inactive" else 0.0
        return binary(clamp(p))

    def f_htn(e):
        p = 0.03 + 0.055 * age_index(e["Age"]) + 1.2 * bmi_bump[e["BMI"]]
        p += 0.04 if e["Alcohol"] == "high" else 0.0
        p += 0.02 if e["Smoking"] == "current" else 0.0
        return binary(clamp(p))

    def f_diab(e):
        p = 0.01 + 0.02 * age_index(e["Age"]) + 0.8 * bmi_bump[e["BMI"]]
        p += 0.02 if e["PA"] == "inactive" else 0.0
        return binary(clamp(p))

    def f_crc(e):
        p = base_risk(e["Age"], e["Sex"])
        for var in ("BMI", "PA", "Smoking", "Alcohol", "Diabetes", "Hypertension"):
            p *= rr[var][e[var]]
        return binary(p)

    fns = {
        "Sex": f_sex,
        "Age": f_age,
        "SES": f_ses,
        "PA": f_pa,
        "Sleep": f_sleep,
        "Alcohol": f_alcohol,
        "Smoking": f_smoking,
        "BMI": f_bmi,
        "Anxiety": f_anxiety,
        "Depression": f_depression,
        "Hypercholesterolemia": f_chol,
        "Hypertension": f_htn,
        "Diabetes": f_diab,
        "CRC": f_crc,
    }

    variables = []
    for name in states:
        ps = [(p, states[p]) for p in parents[name]]
        variables.append(
            {
                "name": name,
                "states": states[name],
                "parents": parents[name],
                "cpt": table(states[name], ps, fns[name]),
            }
        )
    return {"target": "CRC", "target_state": "yes", "variables": variables}


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "crates/core/data/crc_model.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    model = build()
    with open(out, "w") as fh:
        json.dump(model, fh, indent=1)
        fh.write("\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
