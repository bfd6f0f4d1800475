#include "loyalty/compress/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "loyalty/errors.hpp"

namespace loyalty::compress {

namespace {

void calibrate(model::ClassifierModel& m, std::span<const data::EncodedExample> calibration) {
    std::unordered_map<const model::Linear*, double> absmax;
    model::ForwardOptions opts;
    opts.observe_linear = [&absmax](const model::Linear& lin, const nn::Tensor& x) {
        double& slot = absmax[&lin];
        for (double v : x.values()) slot = std::max(slot, std::abs(v));
    };
    for (const auto& ex : calibration) {
        nn::Tape tape(nn::Tape::Mode::inference);
        model::forward(m, tape, ex.ids, opts);
    }
    m.for_each_linear([&absmax](const std::string&, model::Linear& lin) {
        if (auto it = absmax.find(&lin); it != absmax.end()) lin.quant->calibrated_absmax = it->second;
    });
}

}  // namespace

model::ClassifierModel quantize_ptq(const model::ClassifierModel& model,
                                    std::span<const data::EncodedExample> calibration,
                                    bool final_precision, std::vector<std::string>* warnings) {
    if (calibration.empty()) throw InvalidInput("quantize_ptq needs a non-empty calibration set");
    model::ClassifierModel out = model;
    const bool already = model.quantized();
    out.for_each_linear([warnings](const std::string& name, model::Linear& lin) {
        if (lin.quant) return;
        const auto w = lin.weight.value.values();
        if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) {
            const std::string msg = "all-zero weight tensor " + name + " quantized with scale 1";
            spdlog::warn(msg);
            if (warnings) warnings->push_back(msg);
        }
        lin.quant = nn::quantize_weights(lin.weight.value);
    });
    calibrate(out, calibration);
    if (final_precision) out.set_int8_final(true);
    if (!already) out.set_provenance("ptq(" + model.provenance() + ")");
    return out;
}

model::ClassifierModel requantize(const model::ClassifierModel& model,
                                  std::span<const data::EncodedExample> calibration) {
    model::ClassifierModel stripped = model;
    stripped.for_each_linear([](const std::string&, model::Linear& lin) { lin.quant.reset(); });
    model::ClassifierModel out = quantize_ptq(stripped, calibration, model.int8_final());
    out.set_provenance(model.provenance());
    return out;
}

model::ClassifierModel train_qat(const model::ClassifierModel& init,
                                 std::span<const data::EncodedExample> train_set,
                                 std::span<const data::EncodedExample> calibration,
                                 const TeacherSignals* teacher, const TrainOptions& options,
                                 Rng& rng, TrainResult* stats) {
    if (options.loss != LossChoice::cross_entropy && !teacher) {
        throw InvalidConfig("train_qat: KD loss chosen without a teacher");
    }
    if (init.int8_final()) throw InvalidConfig("train_qat: model already has final int8 weights");
    model::ClassifierModel m = quantize_ptq(init, calibration);
    if (options.epochs == 0) return m;
    TrainOptions opts = options;
    opts.fake_quant = true;
    TrainResult r = train(m, train_set, teacher, opts, rng);
    if (stats) *stats = r;
    model::ClassifierModel out = requantize(m, calibration);
    out.set_provenance("qat(" + init.provenance() + ")");
    return out;
}

}  // namespace loyalty::compress
