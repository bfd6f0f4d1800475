#include "loyalty/compress/distill.hpp"

#include "loyalty/errors.hpp"

namespace loyalty::compress {

std::vector<std::size_t> skip_layer_map(std::size_t teacher_layers, std::size_t student_layers) {
    if (student_layers == 0 || student_layers > teacher_layers ||
        teacher_layers % student_layers != 0) {
        throw InvalidConfig("no skip layer mapping from " + std::to_string(teacher_layers) +
                            " teacher layers to " + std::to_string(student_layers) +
                            " student layers");
    }
    const std::size_t stride = teacher_layers / student_layers;
    std::vector<std::size_t> map(student_layers);
    for (std::size_t i = 0; i < student_layers; ++i) map[i] = (i + 1) * stride - 1;
    return map;
}

TrainOptions distill_train_options(const model::ClassifierModel& teacher,
                                   const model::ClassifierModel& student,
                                   const DistillOptions& options) {
    if (student.num_layers() > teacher.num_layers()) {
        throw InvalidConfig("distill: student has more layers than the teacher");
    }
    TrainOptions t = options.train;
    t.temperature = options.temperature;
    t.alpha = options.alpha;
    t.loss = options.alpha >= 1.0 ? LossChoice::kd : LossChoice::kd_ce;
    t.beta = 0.0;
    t.layer_map.clear();
    if (options.variant == DistillVariant::patient) {
        t.beta = options.beta;
        t.layer_map = skip_layer_map(teacher.num_layers(), student.num_layers());
    }
    return t;
}

model::ClassifierModel distill(const model::ClassifierModel& teacher,
                               const model::ClassifierModel& student_init,
                               std::span<const data::EncodedExample> train_set,
                               const TeacherSignals& signals, const DistillOptions& options,
                               Rng& rng, TrainResult* stats) {
    const TrainOptions t = distill_train_options(teacher, student_init, options);
    model::ClassifierModel student = student_init;
    TrainResult r = train(student, train_set, &signals, t, rng);
    if (stats) *stats = r;
    student.set_provenance(std::string(options.variant == DistillVariant::pure ? "pure-kd" : "patient-kd") +
                           "(" + student_init.provenance() + ")");
    return student;
}

}  // namespace loyalty::compress
