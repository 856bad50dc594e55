#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adanas/ensemble.hpp"
#include "adanas/tape.hpp"

namespace adanas {

enum class KDVariant { NOKD, BAN, AKD };

std::string kd_variant_str(KDVariant v);
KDVariant parse_kd_variant(const std::string& s);

// Distillation mode plus soft-target temperature. Temperature applies to
// both sides of the soft cross entropy; the teacher side is fully detached.
struct KDMode {
    KDVariant variant = KDVariant::NOKD;
    double temperature = 1.0;

    void validate() const;
};

// Mean cross entropy of softmax(student logits) against integer labels,
// recorded on the tape. Gradient reaches the student only.
Tape::ValueId classification_loss(Tape& tape, Tape::ValueId student_logits,
                                  const std::vector<int>& labels);

// Mean over the batch of -sum_c softmax(teacher/T)_c * log softmax(student/T)_c.
// Teacher logits are plain values; nothing differentiates through them.
Tape::ValueId soft_cross_entropy(Tape& tape, const Tensor& teacher_logits,
                                 Tape::ValueId student_logits, double temperature);

// The distillation term: nullopt means "no KD node on the tape" (NOKD, or
// BAN/AKD before any teacher exists, i.e. iteration 1). BAN distills from
// prev_subnetwork; AKD from the whole previous ensemble's mixed logits.
// `degraded`, when given, is set true iff BAN/AKD fell back to no-KD.
std::optional<Tape::ValueId> kd_loss(Tape& tape, const KDMode& mode,
                                     const Ensemble& prev_ensemble,
                                     const Subnetwork* prev_subnetwork,
                                     Tape::ValueId student_logits, const Tensor& batch,
                                     bool* degraded = nullptr);

// classification_loss + lambda_kd * kd. Absent kd or lambda_kd == 0 returns
// the classification loss node itself, adding nothing to the tape.
Tape::ValueId candidate_objective(Tape& tape, Tape::ValueId student_logits,
                                  const std::vector<int>& labels,
                                  std::optional<Tape::ValueId> kd, double lambda_kd);

} // namespace adanas
