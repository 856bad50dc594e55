#include "adanas/losses.hpp"

#include "adanas/errors.hpp"

namespace adanas {

std::string kd_variant_str(KDVariant v) {
    switch (v) {
        case KDVariant::NOKD: return "nokd";
        case KDVariant::BAN: return "ban";
        case KDVariant::AKD: return "akd";
    }
    throw Error("unreachable kd variant");
}

KDVariant parse_kd_variant(const std::string& s) {
    if (s == "nokd") return KDVariant::NOKD;
    if (s == "ban") return KDVariant::BAN;
    if (s == "akd") return KDVariant::AKD;
    throw ConfigError("unknown kd_mode \"" + s + "\" (expected nokd, ban, or akd)");
}

void KDMode::validate() const {
    if (!(temperature > 0.0)) {
        throw ConfigError("kd temperature must be positive, got " + std::to_string(temperature));
    }
}

Tape::ValueId classification_loss(Tape& tape, Tape::ValueId student_logits,
                                  const std::vector<int>& labels) {
    return tape.nll(tape.log_softmax(student_logits), labels);
}

Tape::ValueId soft_cross_entropy(Tape& tape, const Tensor& teacher_logits,
                                 Tape::ValueId student_logits, double temperature) {
    if (teacher_logits.shape != tape.value(student_logits).shape) {
        throw ShapeError("soft_cross_entropy: teacher " + shape_str(teacher_logits.shape) +
                         " vs student " + shape_str(tape.value(student_logits).shape));
    }
    // Teacher distribution is computed off-tape: detached by construction.
    Tensor scaled = teacher_logits;
    if (temperature != 1.0) {
        for (double& v : scaled.data) v /= temperature;
    }
    Tape forward_only;
    Tensor teacher_probs = forward_only.value(forward_only.softmax(forward_only.input(std::move(scaled))));

    Tape::ValueId student = student_logits;
    if (temperature != 1.0) {
        student = tape.scalar_scale(student, 1.0 / temperature);
    }
    return tape.weighted_nll(tape.log_softmax(student), tape.input(std::move(teacher_probs)));
}

std::optional<Tape::ValueId> kd_loss(Tape& tape, const KDMode& mode,
                                     const Ensemble& prev_ensemble,
                                     const Subnetwork* prev_subnetwork,
                                     Tape::ValueId student_logits, const Tensor& batch,
                                     bool* degraded) {
    mode.validate();
    if (degraded) *degraded = false;
    if (mode.variant == KDVariant::NOKD) return std::nullopt;

    if (mode.variant == KDVariant::BAN) {
        if (!prev_subnetwork) {
            // No teacher yet (iteration 1): degrade to no KD.
            if (degraded) *degraded = true;
            return std::nullopt;
        }
        return soft_cross_entropy(tape, eager_logits(*prev_subnetwork, batch), student_logits,
                                  mode.temperature);
    }

    if (prev_ensemble.empty()) {
        if (degraded) *degraded = true;
        return std::nullopt;
    }
    return soft_cross_entropy(tape, ensemble_logits(prev_ensemble, batch), student_logits,
                              mode.temperature);
}

Tape::ValueId candidate_objective(Tape& tape, Tape::ValueId student_logits,
                                  const std::vector<int>& labels,
                                  std::optional<Tape::ValueId> kd, double lambda_kd) {
    if (lambda_kd < 0.0) {
        throw ConfigError("lambda_kd must be nonnegative, got " + std::to_string(lambda_kd));
    }
    const Tape::ValueId ce = classification_loss(tape, student_logits, labels);
    if (!kd || lambda_kd == 0.0) return ce;
    const Tape::ValueId term = lambda_kd == 1.0 ? *kd : tape.scalar_scale(*kd, lambda_kd);
    return tape.add(ce, term);
}

} // namespace adanas
