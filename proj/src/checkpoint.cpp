#include "stpp/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "stpp/version.hpp"

namespace stpp {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json matrix_to_json(const Eigen::MatrixXd& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}

json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                                 const char* name) {
    const auto vals = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(vals.size()) != rows * cols) {
        throw std::runtime_error(std::string("checkpoint: weight '") + name +
                                 "' has the wrong element count");
    }
    return Eigen::Map<const Eigen::MatrixXd>(vals.data(), rows, cols);
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index size, const char* name) {
    return matrix_from_json(j, size, 1, name);
}

json scaling_to_json(const ScalingTransform& tf) {
    json j;
    j["time_offset"] = tf.time_offset;
    j["time_scale"] = tf.time_scale;
    j["space_offset"] = std::vector<double>{tf.space_offset.x(), tf.space_offset.y()};
    j["space_scale"] = std::vector<double>{tf.space_scale.x(), tf.space_scale.y()};
    return j;
}

ScalingTransform scaling_from_json(const json& j) {
    ScalingTransform tf;
    tf.time_offset = j.at("time_offset").get<double>();
    tf.time_scale = j.at("time_scale").get<double>();
    const auto so = j.at("space_offset").get<std::vector<double>>();
    const auto ss = j.at("space_scale").get<std::vector<double>>();
    if (so.size() != 2 || ss.size() != 2) throw std::runtime_error("checkpoint: bad scaling block");
    tf.space_offset = {so[0], so[1]};
    tf.space_scale = {ss[0], ss[1]};
    return tf;
}

json cell_to_json(const RecurrentCell& cell) {
    json j;
    j["mode"] = cell.mode == RecurrentMode::lstm ? "lstm" : "rnn";
    j["hidden"] = cell.hidden;
    if (cell.mode == RecurrentMode::rnn) {
        j["V"] = matrix_to_json(cell.V);
        j["W"] = matrix_to_json(cell.W);
        j["B"] = vector_to_json(cell.B);
    } else {
        j["Wx"] = matrix_to_json(cell.Wx);
        j["Wh"] = matrix_to_json(cell.Wh);
        j["Wb"] = vector_to_json(cell.Wb);
    }
    return j;
}

RecurrentCell cell_from_json(const json& j) {
    const std::string mode = j.at("mode").get<std::string>();
    const int hidden = j.at("hidden").get<int>();
    RecurrentCell cell =
        make_cell(mode == "lstm" ? RecurrentMode::lstm : RecurrentMode::rnn, hidden);
    if (cell.mode == RecurrentMode::rnn) {
        cell.V = matrix_from_json(j.at("V"), hidden, 3, "V");
        cell.W = matrix_from_json(j.at("W"), hidden, hidden, "W");
        cell.B = vector_from_json(j.at("B"), hidden, "B");
    } else {
        cell.Wx = matrix_from_json(j.at("Wx"), 4 * hidden, 3, "Wx");
        cell.Wh = matrix_from_json(j.at("Wh"), 4 * hidden, hidden, "Wh");
        cell.Wb = vector_from_json(j.at("Wb"), 4 * hidden, "Wb");
    }
    return cell;
}

json load_and_check(const std::filesystem::path& path, const char* expected_model) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    json j = json::parse(in);
    if (j.at("format").get<int>() != kFormatVersion) {
        throw std::runtime_error("unsupported checkpoint format version in " + path.string());
    }
    if (j.at("model").get<std::string>() != expected_model) {
        throw std::runtime_error(path.string() + " is not a '" + expected_model + "' checkpoint");
    }
    return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

void save_generator_checkpoint(const std::filesystem::path& path, const GeneratorCheckpoint& ck) {
    json j;
    j["version"] = kVersion;
    j["format"] = kFormatVersion;
    j["model"] = "generator";
    j["dims"] = {{"hidden", ck.params.dims.hidden},
                 {"mlp_hidden", ck.params.dims.mlp_hidden},
                 {"noise", ck.params.dims.noise},
                 {"features", ck.params.dims.features}};
    j["cell"] = cell_to_json(ck.params.cell);
    j["H1"] = matrix_to_json(ck.params.H1);
    j["U1"] = vector_to_json(ck.params.U1);
    j["H2"] = matrix_to_json(ck.params.H2);
    j["U2"] = vector_to_json(ck.params.U2);
    j["scaling"] = scaling_to_json(ck.scaling);
    j["feature_schema"] = ck.feature_schema;
    j["event_unit"] = ck.event_unit;
    write_json(path, j);
}

GeneratorCheckpoint load_generator_checkpoint(const std::filesystem::path& path) {
    const json j = load_and_check(path, "generator");
    GeneratorCheckpoint ck;
    GeneratorDims dims;
    dims.hidden = j.at("dims").at("hidden").get<int>();
    dims.mlp_hidden = j.at("dims").at("mlp_hidden").get<int>();
    dims.noise = j.at("dims").at("noise").get<int>();
    dims.features = j.at("dims").at("features").get<int>();
    ck.params.cell = cell_from_json(j.at("cell"));
    if (ck.params.cell.hidden != dims.hidden) {
        throw std::runtime_error("checkpoint: cell hidden size disagrees with dims");
    }
    ck.params.dims = dims;
    const Eigen::Index in = dims.hidden + dims.noise + dims.features;
    ck.params.H1 = matrix_from_json(j.at("H1"), dims.mlp_hidden, in, "H1");
    ck.params.U1 = vector_from_json(j.at("U1"), dims.mlp_hidden, "U1");
    ck.params.H2 = matrix_from_json(j.at("H2"), 3, dims.mlp_hidden, "H2");
    ck.params.U2 = vector_from_json(j.at("U2"), 3, "U2");
    ck.scaling = scaling_from_json(j.at("scaling"));
    ck.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
    ck.event_unit = j.value("event_unit", 1);
    return ck;
}

void save_baseline_checkpoint(const std::filesystem::path& path, const BaselineCheckpoint& ck) {
    json j;
    j["version"] = kVersion;
    j["format"] = kFormatVersion;
    j["model"] = "baseline";
    j["cell"] = cell_to_json(ck.params.cell);
    j["w_rate"] = vector_to_json(ck.params.w_rate);
    j["b_rate"] = ck.params.b_rate;
    j["W_mean"] = matrix_to_json(ck.params.W_mean);
    j["b_mean"] = std::vector<double>{ck.params.b_mean.x(), ck.params.b_mean.y()};
    j["W_var"] = matrix_to_json(ck.params.W_var);
    j["b_var"] = std::vector<double>{ck.params.b_var.x(), ck.params.b_var.y()};
    j["scaling"] = scaling_to_json(ck.scaling);
    write_json(path, j);
}

BaselineCheckpoint load_baseline_checkpoint(const std::filesystem::path& path) {
    const json j = load_and_check(path, "baseline");
    BaselineCheckpoint ck;
    ck.params.cell = cell_from_json(j.at("cell"));
    const int hidden = ck.params.cell.hidden;
    ck.params.w_rate = vector_from_json(j.at("w_rate"), hidden, "w_rate");
    ck.params.b_rate = j.at("b_rate").get<double>();
    ck.params.W_mean = matrix_from_json(j.at("W_mean"), 2, hidden, "W_mean");
    const auto bm = j.at("b_mean").get<std::vector<double>>();
    const auto bv = j.at("b_var").get<std::vector<double>>();
    if (bm.size() != 2 || bv.size() != 2) throw std::runtime_error("checkpoint: bad head biases");
    ck.params.b_mean = {bm[0], bm[1]};
    ck.params.W_var = matrix_from_json(j.at("W_var"), 2, hidden, "W_var");
    ck.params.b_var = {bv[0], bv[1]};
    ck.scaling = scaling_from_json(j.at("scaling"));
    return ck;
}

void save_triggering_model(const std::filesystem::path& path, const TriggeringModel& model) {
    json j;
    j["version"] = kVersion;
    j["format"] = kFormatVersion;
    j["model"] = "selfexciting";
    if (model.base.kind == BaseRate::Kind::constant) {
        j["base"] = {{"kind", "constant"}, {"value", model.base.value}};
    } else {
        j["base"] = {{"kind", "grid"},
                     {"rows", model.base.cells.rows()},
                     {"cols", model.base.cells.cols()},
                     {"values", matrix_to_json(model.base.cells)}};
    }
    j["trigger"] = {{"weight", model.trigger.weight},
                    {"decay", model.trigger.decay},
                    {"sigma", model.trigger.sigma}};
    j["horizon"] = model.horizon;
    j["region"] = std::vector<double>{model.region.min.x(), model.region.max.x(),
                                      model.region.min.y(), model.region.max.y()};
    write_json(path, j);
}

TriggeringModel load_triggering_model(const std::filesystem::path& path) {
    const json j = load_and_check(path, "selfexciting");
    TriggeringModel model;
    const json& base = j.at("base");
    if (base.at("kind").get<std::string>() == "constant") {
        model.base = BaseRate::constant(base.at("value").get<double>());
    } else {
        const Eigen::Index rows = base.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = base.at("cols").get<Eigen::Index>();
        model.base = BaseRate::grid(matrix_from_json(base.at("values"), rows, cols, "base"));
    }
    model.trigger.weight = j.at("trigger").at("weight").get<double>();
    model.trigger.decay = j.at("trigger").at("decay").get<double>();
    model.trigger.sigma = j.at("trigger").at("sigma").get<double>();
    model.horizon = j.at("horizon").get<double>();
    const auto r = j.at("region").get<std::vector<double>>();
    if (r.size() != 4) throw std::runtime_error("checkpoint: bad region");
    model.region.min = {r[0], r[2]};
    model.region.max = {r[1], r[3]};
    return model;
}

std::string checkpoint_kind(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    const json j = json::parse(in);
    return j.at("model").get<std::string>();
}

}  // namespace stpp
