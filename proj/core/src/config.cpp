#include "csda/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace csda {

const std::vector<Config::KeyDoc>& Config::schema() {
    static const std::vector<KeyDoc> kSchema = {
        // rendering
        {"image_w", "256", "depth map width in pixels"},
        {"image_h", "256", "depth map height in pixels"},
        {"focal_px", "auto", "focal length in pixels; auto = 420*image_w/256"},
        {"ring_radius_m", "1.2", "camera ring radius around the cloth (m)"},
        {"cameras", "36", "cameras on the ring"},
        // cloth geometry
        {"body_w", "0.5", "shirt body width (m)"},
        {"body_h", "0.7", "shirt body height (m)"},
        {"sleeve_w", "0.2", "sleeve length along x (m)"},
        {"sleeve_h", "0.15", "sleeve height along y (m)"},
        {"resolution", "40", "mesh vertices per meter"},
        // simulation
        {"sim_dt", "0.0166667", "integrator frame step (s)"},
        {"sim_substeps", "96", "integrator substeps per frame"},
        {"sim_steps", "250", "frames per hang simulation"},
        {"damping", "0.02", "velocity damping per frame, in [0,1)"},
        {"density", "0.15", "cloth area density (kg/m^2)"},
        {"k_structural", "500", "structural spring stiffness (N/m)"},
        {"k_shear", "250", "shear spring stiffness (N/m)"},
        {"k_bend", "50", "bend spring stiffness (N/m)"},
        {"surrogate_k_structural_scale", "0.5",
         "structural stiffness multiplier for the surrogate_real domain"},
        // sensor model (surrogate_real domain)
        {"sensor_noise_mm", "4", "gaussian depth noise sigma (mm)"},
        {"sensor_quant_mm", "1", "depth quantisation step (mm)"},
        {"sensor_dropout", "0.02", "foreground fraction dropped at high-gradient pixels"},
        // dataset
        {"test_fraction", "0.2", "fraction of hang configs assigned to the test split"},
        {"augment", "1", "apply flip/rotate/crop augmentation during training"},
        {"covariance_rescale", "1",
         "rescale synthetic samples toward the reference domain shape statistics"},
        // training
        {"epochs", "40", "training epochs"},
        {"batch_size", "8", "items per optimizer step (half synth, half real in da)"},
        {"lr", "0.001", "adam learning rate"},
        {"adam_beta1", "0.9", "adam first-moment decay"},
        {"adam_beta2", "0.999", "adam second-moment decay"},
        {"alpha", "1.0", "weight of the segmentation term in the total loss"},
        {"class_weight_temper", "0.5",
         "exponent applied to inverse-frequency class weights before mean-1 renormalization"},
        {"grl_gamma", "10", "gradient-reversal schedule steepness"},
        {"grl_lambda_max", "1.0", "gradient-reversal coefficient ceiling"},
        {"finetune_lr_scale", "0.1", "learning-rate multiplier for finetune phases"},
        {"precision", "double", "training arithmetic: double or float"},
        {"val_fraction", "0.1", "fraction of train configs used for the per-epoch IoU snapshot"},
        {"classes", "6", "segmentation class count (background + 5 cloth classes)"},
        {"widths", "16,32,64,128,256", "encoder channel widths"},
    };
    return kSchema;
}

Config::Config() {
    for (const auto& k : schema()) values_[k.key] = k.def;
}

Config Config::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path.string());
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: missing '=' at " + path.string() + ":" +
                                        std::to_string(lineno));
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
    if (values_.find(key) == values_.end())
        throw std::invalid_argument("config: unknown key '" + key + "'");
    values_[key] = value;
}

const std::string& Config::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        throw std::invalid_argument("config: unknown key '" + key + "'");
    return it->second;
}

double Config::real(const std::string& key) const {
    const std::string& s = str(key);
    if (key == "focal_px" && s == "auto") return 420.0 * real("image_w") / 256.0;
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not a number: '" + s + "'");
    }
}

int Config::integer(const std::string& key) const {
    const double v = real(key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw std::invalid_argument("config: key '" + key + "' is not an integer");
    return i;
}

bool Config::flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "1" || s == "true" || s == "on") return true;
    if (s == "0" || s == "false" || s == "off") return false;
    throw std::invalid_argument("config: key '" + key + "' is not a boolean: '" + s + "'");
}

std::string Config::canonical_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << "=" << v << "\n";
    return os.str();
}

std::uint64_t Config::hash() const {
    const std::string text = canonical_text();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace csda
