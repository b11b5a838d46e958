#include "odecast/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "odecast/errors.hpp"
#include "odecast/rng.hpp"

namespace odecast {

namespace {

void validate_config(const ModelConfig& c) {
    if (c.input_dim == 0 || c.hidden_dim == 0 || c.latent_dim == 0 || c.target_dim == 0)
        throw ContractError("model config: dimensions must be positive");
    if (c.lag < 1 || c.horizon < 1)
        throw ContractError("model config: lag and horizon must be >= 1");
    if (c.max_step <= 0.0) throw ContractError("model config: max_step must be positive");
}

} // namespace

OdeForecaster::OdeForecaster(const ModelConfig& config) : config_(config) {
    validate_config(config_);
    Rng rng(config_.seed);
    // Construction order fixes the draw order; the isolation layer comes last
    // so disabling it leaves every other initial weight unchanged.
    encoder_ = GruCell(config_.input_dim, config_.hidden_dim, rng);
    latent_proj_ = LinearLayer(config_.hidden_dim, 2 * config_.latent_dim, rng);
    dynamics_ = DynamicsNet(config_.latent_dim, config_.hidden_dim, rng);
    latent_to_hidden_ = LinearLayer(config_.latent_dim, config_.hidden_dim, rng);
    recon_head_ = LinearLayer(config_.hidden_dim, config_.input_dim, rng);
    output_head_ = LinearLayer(config_.hidden_dim, config_.target_dim * config_.horizon, rng);
    if (config_.til_enabled) {
        til_ = LstmCell(config_.input_dim, config_.hidden_dim, rng);
        concat_head_ = LinearLayer(2 * config_.hidden_dim, config_.hidden_dim, rng);
    }
    build_registry();
}

void OdeForecaster::build_registry() {
    params_.clear();
    encoder_.register_params(params_, "encoder");
    latent_proj_.register_params(params_, "latent_proj");
    dynamics_.register_params(params_, "dynamics");
    latent_to_hidden_.register_params(params_, "latent_to_hidden");
    recon_head_.register_params(params_, "recon_head");
    output_head_.register_params(params_, "output_head");
    if (config_.til_enabled) {
        til_.register_params(params_, "til");
        concat_head_.register_params(params_, "concat_head");
    }
}

bool OdeForecaster::is_warmup_only(const std::string& name) const {
    return name.rfind("recon_head", 0) == 0;
}

LatentDistribution OdeForecaster::encode_steps(Tape& tape,
                                               const std::vector<Tensor>& steps) const {
    if (steps.empty()) throw ContractError("encode: empty window");
    const bool batched = steps.front().rank() == 2;
    const std::size_t batch = batched ? steps.front().rows() : 0;

    Tensor h = batched ? Tensor::zeros({batch, config_.hidden_dim})
                       : Tensor::zeros({config_.hidden_dim});
    for (const Tensor& x : steps) h = encoder_.step(tape, x, h);

    Tensor proj = latent_proj_.apply(tape, h);
    return {slice_cols(tape, proj, 0, config_.latent_dim),
            slice_cols(tape, proj, config_.latent_dim, 2 * config_.latent_dim)};
}

LatentDistribution OdeForecaster::encode(Tape& tape, const Tensor& window) const {
    if (window.rank() != 2 || window.cols() != config_.input_dim)
        throw ContractError("encode: window must be [rows x input_dim]");
    if (window.rows() == 0) throw ContractError("encode: empty window");
    std::vector<Tensor> steps;
    steps.reserve(window.rows());
    for (std::size_t r = 0; r < window.rows(); ++r) {
        std::vector<double> row(window.values().begin() + r * config_.input_dim,
                                window.values().begin() + (r + 1) * config_.input_dim);
        steps.push_back(Tensor::from_vector(std::move(row)));
    }
    return encode_steps(tape, steps);
}

Tensor OdeForecaster::reparameterize(Tape& tape, const LatentDistribution& dist,
                                     const Tensor& eps) const {
    if (eps.shape() != dist.mu.shape())
        throw DimensionError("reparameterize: eps shape must match the latent shape");
    Tensor std_dev = exp(tape, scale(tape, dist.logvar, 0.5));
    return add(tape, dist.mu, mul(tape, eps, std_dev));
}

OdeForecaster::Decoded OdeForecaster::decode_window(Tape& tape, const Tensor& z0,
                                                    const TimeGrid& grid,
                                                    bool with_reconstruction) const {
    Decoded out;
    out.trajectory = integrate(tape, dynamics_, z0, grid, config_.max_step);
    out.hidden.reserve(out.trajectory.states.size());
    for (const Tensor& z : out.trajectory.states) {
        Tensor h = latent_to_hidden_.apply(tape, z);
        out.hidden.push_back(h);
        if (with_reconstruction) out.reconstruction.push_back(recon_head_.apply(tape, h));
    }
    return out;
}

std::pair<Tensor, OnlineState> OdeForecaster::til_forward(Tape& tape, const Tensor& window,
                                                          const OnlineState& state) const {
    if (!config_.til_enabled)
        throw ContractError("til_forward: isolation layer disabled in this config");
    if (window.rank() != 2 || window.cols() != config_.input_dim)
        throw ContractError("til_forward: window must be [rows x input_dim]");
    if (window.rows() == 0) throw ContractError("til_forward: empty window");
    Tensor h = state.hidden;
    Tensor c = state.cell;
    for (std::size_t r = 0; r < window.rows(); ++r) {
        std::vector<double> row(window.values().begin() + r * config_.input_dim,
                                window.values().begin() + (r + 1) * config_.input_dim);
        auto [hn, cn] = til_.step(tape, Tensor::from_vector(std::move(row)), h, c);
        h = hn;
        c = cn;
    }
    return {h, OnlineState{h, c}};
}

Tensor OdeForecaster::fuse_and_predict(Tape& tape, const Tensor& h_ode,
                                       const Tensor& h_til) const {
    if (!config_.til_enabled) return output_head_.apply(tape, h_ode);
    if (!h_til.defined())
        throw ContractError("fuse_and_predict: missing isolation-layer hidden state");
    Tensor joint = concat(tape, h_til, h_ode);
    Tensor fused = concat_head_.apply(tape, joint);
    return output_head_.apply(tape, fused);
}

OnlineState OdeForecaster::initial_state() const {
    return {Tensor::zeros({config_.hidden_dim}), Tensor::zeros({config_.hidden_dim})};
}

std::size_t OdeForecaster::retained_value_count() const {
    return total_param_count(params_);
}

// --- checkpoint format -------------------------------------------------------
// magic | u32 version | config fields | u32 param count |
// per param: u32 name length, name, u32 rank, u64 dims, f64 data |
// u64 fnv1a checksum over everything before it. Little-endian throughout.

namespace {

constexpr char kMagic[8] = {'O', 'D', 'C', 'S', 'T', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

struct Hasher {
    std::uint64_t state = 1469598103934665603ULL;
    void feed(const void* data, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state ^= p[i];
            state *= 1099511628211ULL;
        }
    }
};

class CheckpointWriter {
public:
    explicit CheckpointWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot write checkpoint: " + path);
    }
    template <typename T>
    void write(const T& v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
        hash_.feed(&v, sizeof(T));
    }
    void write_bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        hash_.feed(data, n);
    }
    void finish() {
        const std::uint64_t checksum = hash_.state;
        out_.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
        if (!out_) throw DataError("checkpoint write failed");
    }

private:
    std::ofstream out_;
    Hasher hash_;
};

class CheckpointReader {
public:
    explicit CheckpointReader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open checkpoint: " + path);
    }
    template <typename T>
    T read() {
        T v;
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw DataError("checkpoint truncated");
        hash_.feed(&v, sizeof(T));
        return v;
    }
    void read_bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (!in_) throw DataError("checkpoint truncated");
        hash_.feed(data, n);
    }
    void verify_checksum() {
        const std::uint64_t expected = hash_.state;
        std::uint64_t stored;
        in_.read(reinterpret_cast<char*>(&stored), sizeof(stored));
        if (!in_ || stored != expected) throw DataError("checkpoint checksum mismatch");
    }

private:
    std::ifstream in_;
    Hasher hash_;
};

void write_config(CheckpointWriter& w, const ModelConfig& c) {
    w.write<std::uint64_t>(c.input_dim);
    w.write<std::uint64_t>(c.hidden_dim);
    w.write<std::uint64_t>(c.latent_dim);
    w.write<std::uint64_t>(c.lag);
    w.write<std::uint64_t>(c.horizon);
    w.write<std::uint64_t>(c.target_dim);
    w.write<std::uint64_t>(c.seed);
    w.write<std::uint8_t>(c.til_enabled ? 1 : 0);
    w.write<double>(c.max_step);
}

ModelConfig read_config(CheckpointReader& r) {
    ModelConfig c;
    c.input_dim = r.read<std::uint64_t>();
    c.hidden_dim = r.read<std::uint64_t>();
    c.latent_dim = r.read<std::uint64_t>();
    c.lag = r.read<std::uint64_t>();
    c.horizon = r.read<std::uint64_t>();
    c.target_dim = r.read<std::uint64_t>();
    c.seed = r.read<std::uint64_t>();
    c.til_enabled = r.read<std::uint8_t>() != 0;
    c.max_step = r.read<double>();
    return c;
}

} // namespace

void OdeForecaster::checkpoint_save(const std::string& path) const {
    CheckpointWriter w(path);
    w.write_bytes(kMagic, sizeof(kMagic));
    w.write<std::uint32_t>(kVersion);
    write_config(w, config_);
    w.write<std::uint32_t>(static_cast<std::uint32_t>(params_.size()));
    for (const NamedParam& p : params_) {
        w.write<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
        w.write_bytes(p.name.data(), p.name.size());
        w.write<std::uint32_t>(static_cast<std::uint32_t>(p.tensor.rank()));
        for (std::size_t d : p.tensor.shape()) w.write<std::uint64_t>(d);
        w.write_bytes(p.tensor.values().data(), p.tensor.size() * sizeof(double));
    }
    w.finish();
}

namespace {

void load_params(CheckpointReader& r, ParamRegistry& params) {
    const std::uint32_t count = r.read<std::uint32_t>();
    if (count != params.size()) throw ConfigMismatchError("checkpoint parameter count differs");
    for (NamedParam& p : params) {
        const std::uint32_t name_len = r.read<std::uint32_t>();
        std::string name(name_len, '\0');
        r.read_bytes(name.data(), name_len);
        if (name != p.name)
            throw ConfigMismatchError("checkpoint parameter '" + name + "' does not match '" +
                                      p.name + "'");
        const std::uint32_t rank = r.read<std::uint32_t>();
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i)
            shape[i] = static_cast<std::size_t>(r.read<std::uint64_t>());
        if (shape != p.tensor.shape())
            throw ConfigMismatchError("checkpoint shape mismatch for '" + name + "'");
        r.read_bytes(p.tensor.values().data(), p.tensor.size() * sizeof(double));
    }
    r.verify_checksum();
}

ModelConfig read_header(CheckpointReader& r) {
    char magic[sizeof(kMagic)];
    r.read_bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a checkpoint file");
    const std::uint32_t version = r.read<std::uint32_t>();
    if (version != kVersion) throw DataError("unsupported checkpoint version");
    return read_config(r);
}

} // namespace

OdeForecaster OdeForecaster::checkpoint_load(const std::string& path) {
    CheckpointReader r(path);
    const ModelConfig config = read_header(r);
    OdeForecaster model(config);
    load_params(r, model.params_);
    return model;
}

void OdeForecaster::checkpoint_restore(const std::string& path) {
    CheckpointReader r(path);
    const ModelConfig file_config = read_header(r);
    if (!(file_config == config_))
        throw ConfigMismatchError("checkpoint config does not match model config");
    load_params(r, params_);
}

std::uint64_t OdeForecaster::checkpoint_checksum() const {
    Hasher h;
    for (const NamedParam& p : params_) {
        h.feed(p.name.data(), p.name.size());
        h.feed(p.tensor.values().data(), p.tensor.size() * sizeof(double));
    }
    return h.state;
}

} // namespace odecast
