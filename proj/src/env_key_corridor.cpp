#include <algorithm>
#include <deque>
#include <memory>
#include <unordered_set>

#include "gowu/env.hpp"

namespace gowu {
namespace {

constexpr char kMagic[4] = {'K', 'C', 'O', 'R'};
constexpr uint8_t kVersion = 1;
constexpr int kRows = 3;

// Cell roles on the static layout grid.
enum class Cell : uint8_t { Floor, Wall, Door, Key, Hazard, Treasure };

struct AgentState {
  int row = 1;
  int col = 0;
  uint32_t keys = 0;   // bit r set once key of room r is collected
  uint32_t doors = 0;  // bit r set once door r has been opened
};

struct MoveResult {
  AgentState state;
  double reward = 0.0;
  bool died = false;
  bool treasure = false;
};

class KeyCorridorEnv final : public Env {
 public:
  explicit KeyCorridorEnv(const KeyCorridorConfig& cfg) : cfg_(cfg) {
    if (cfg.num_rooms < 1 || cfg.num_rooms > 32)
      throw ConfigError("key corridor: num_rooms must be in [1, 32]");
    if (cfg.room_length < 2)
      throw ConfigError("key corridor: room_length must be >= 2");
    if (cfg.hazard_cells_per_room < 0 ||
        cfg.hazard_cells_per_room > kRows * cfg.room_length - 2)
      throw ConfigError("key corridor: hazard_cells_per_room out of range");
    if (cfg.sticky_p < 0.0 || cfg.sticky_p >= 1.0)
      throw ConfigError("key corridor: sticky_p must be in [0, 1)");
    build_layout();
    check_solvable();
    reset_state();
  }

  EnvKind kind() const override { return EnvKind::KeyCorridor; }

  int arity() const override { return done_ ? 0 : 4; }

  Status status() const override { return status_; }

  Observation observe() const override {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(status_));
    w.u8(static_cast<uint8_t>(agent_.row));
    w.u16(static_cast<uint16_t>(agent_.col));
    w.u32(agent_.keys);
    w.u32(agent_.doors);
    return Observation::from_bytes(w.take());
  }

  StepResult step(Action a) override {
    if (status_ == Status::Dead)
      throw DeadEnvironment("key corridor: step on a dead agent");
    if (a.index < 0 || a.index >= arity())
      throw ActionOutOfRange("key corridor: action " + std::to_string(a.index) +
                             " out of range [0, " + std::to_string(arity()) + ")");
    int executed = a.index;
    if (cfg_.sticky_p > 0.0 && has_prev_) {
      Rng rng(rng_state_);
      if (rng.uniform_real() < cfg_.sticky_p) executed = prev_action_;
      rng_state_ = rng.state();
    }
    MoveResult m = apply_move(agent_, executed);
    agent_ = m.state;
    prev_action_ = static_cast<uint8_t>(executed);
    has_prev_ = true;
    if (m.died) status_ = Status::Dead;
    if (m.treasure) done_ = true;
    StepResult r;
    r.reward = m.reward;
    r.status = status_;
    r.observation = observe();
    return r;
  }

  Snapshot snapshot() const override {
    ByteWriter w;
    w.magic(kMagic);
    w.u8(kVersion);
    w.u64(config_digest());
    w.u8(static_cast<uint8_t>(agent_.row));
    w.u16(static_cast<uint16_t>(agent_.col));
    w.u32(agent_.keys);
    w.u32(agent_.doors);
    w.u8(static_cast<uint8_t>(status_));
    w.u8(done_ ? 1 : 0);
    w.u8(has_prev_ ? 1 : 0);
    w.u8(prev_action_);
    w.u64(rng_state_);
    return Snapshot{EnvKind::KeyCorridor, w.take()};
  }

  void restore(const Snapshot& s) override {
    if (s.env_kind != EnvKind::KeyCorridor)
      throw KindMismatch("key corridor: snapshot is for " +
                         std::string(env_kind_name(s.env_kind)));
    try {
      ByteReader r(s.blob);
      r.expect_magic(kMagic, "key corridor snapshot");
      if (r.u8() != kVersion) throw DecodeError("key corridor snapshot: unsupported version");
      uint64_t digest = r.u64();
      if (digest != config_digest())
        throw KindMismatch("key corridor: snapshot from a differently configured instance");
      AgentState a;
      a.row = r.u8();
      a.col = r.u16();
      a.keys = r.u32();
      a.doors = r.u32();
      auto st = static_cast<Status>(r.u8());
      bool done = r.u8() != 0;
      bool has_prev = r.u8() != 0;
      uint8_t prev = r.u8();
      uint64_t rng_state = r.u64();
      if (!r.at_end()) throw DecodeError("key corridor snapshot: trailing bytes");
      if (a.row >= kRows || a.col >= total_cols_)
        throw DecodeError("key corridor snapshot: agent outside the grid");
      uint32_t room_mask = (cfg_.num_rooms == 32) ? 0xffffffffu
                                                  : ((1u << cfg_.num_rooms) - 1u);
      if ((a.keys & ~room_mask) != 0 || (a.doors & ~room_mask) != 0)
        throw DecodeError("key corridor snapshot: key/door bits out of range");
      agent_ = a;
      status_ = st;
      done_ = done;
      has_prev_ = has_prev;
      prev_action_ = prev;
      rng_state_ = rng_state;
    } catch (const DecodeError& e) {
      throw CorruptSnapshot(e.what());
    }
  }

  uint64_t config_digest() const override {
    // Layout identity only; sticky_p is excluded so a deterministic fork can
    // adopt snapshots taken under sticky dynamics.
    return derive_stream({static_cast<uint64_t>(EnvKind::KeyCorridor),
                          static_cast<uint64_t>(cfg_.num_rooms),
                          static_cast<uint64_t>(cfg_.room_length),
                          static_cast<uint64_t>(cfg_.hazard_cells_per_room),
                          cfg_.layout_seed});
  }

  std::unique_ptr<Env> fork_deterministic() const override {
    KeyCorridorConfig det = cfg_;
    det.sticky_p = 0.0;
    auto fresh = std::make_unique<KeyCorridorEnv>(det);
    fresh->restore(snapshot());
    return fresh;
  }

 private:
  int cell_index(int row, int col) const { return row * total_cols_ + col; }

  void build_layout() {
    const int R = cfg_.num_rooms;
    const int L = cfg_.room_length;
    total_cols_ = R * (L + 1) + 1;
    grid_.assign(kRows * total_cols_, Cell::Floor);
    cell_room_.assign(kRows * total_cols_, -1);

    for (int r = 0; r < R; ++r) {
      int wall_col = r * (L + 1) + L;
      for (int row = 0; row < kRows; ++row)
        grid_[cell_index(row, wall_col)] = Cell::Wall;
      grid_[cell_index(1, wall_col)] = Cell::Door;
      cell_room_[cell_index(1, wall_col)] = r;
      for (int c = r * (L + 1); c < wall_col; ++c)
        for (int row = 0; row < kRows; ++row)
          cell_room_[cell_index(row, c)] = r;
    }
    int treasure_col = total_cols_ - 1;
    grid_[cell_index(0, treasure_col)] = Cell::Wall;
    grid_[cell_index(2, treasure_col)] = Cell::Wall;
    grid_[cell_index(1, treasure_col)] = Cell::Treasure;

    Rng rng(derive_stream({0x4bu, cfg_.layout_seed}));
    for (int r = 0; r < R; ++r) {
      std::vector<int> open;
      for (int c = r * (L + 1); c < r * (L + 1) + L; ++c)
        for (int row = 0; row < kRows; ++row)
          if (!(r == 0 && row == 1 && c == 0))  // keep the start cell clear
            open.push_back(cell_index(row, c));
      int key_at = open[rng.next_below(open.size())];
      grid_[key_at] = Cell::Key;
      open.erase(std::find(open.begin(), open.end(), key_at));
      for (int h = 0; h < cfg_.hazard_cells_per_room && !open.empty(); ++h) {
        int idx = static_cast<int>(rng.next_below(open.size()));
        grid_[open[idx]] = Cell::Hazard;
        open.erase(open.begin() + idx);
      }
    }
  }

  // Deterministic transition shared by step(), the construction-time
  // solvability check, and nothing else. Blocked moves leave the agent in
  // place.
  MoveResult apply_move(const AgentState& s, int action) const {
    static constexpr int dr[4] = {-1, 1, 0, 0};
    static constexpr int dc[4] = {0, 0, -1, 1};
    MoveResult m;
    m.state = s;
    int nr = s.row + dr[action];
    int nc = s.col + dc[action];
    if (nr < 0 || nr >= kRows || nc < 0 || nc >= total_cols_) return m;
    Cell cell = grid_[cell_index(nr, nc)];
    int room = cell_room_[cell_index(nr, nc)];
    switch (cell) {
      case Cell::Wall:
        return m;
      case Cell::Door:
        if ((s.keys & (1u << room)) == 0) return m;  // locked
        m.state.row = nr;
        m.state.col = nc;
        if ((s.doors & (1u << room)) == 0) {
          m.state.doors |= (1u << room);
          m.reward = 1.0;
        }
        return m;
      case Cell::Key:
        m.state.row = nr;
        m.state.col = nc;
        if ((s.keys & (1u << room)) == 0) {
          m.state.keys |= (1u << room);
          m.reward = 1.0;
        }
        return m;
      case Cell::Hazard:
        m.state.row = nr;
        m.state.col = nc;
        m.died = true;
        return m;
      case Cell::Treasure:
        m.state.row = nr;
        m.state.col = nc;
        m.reward = 10.0;
        m.treasure = true;
        return m;
      case Cell::Floor:
        m.state.row = nr;
        m.state.col = nc;
        return m;
    }
    return m;
  }

  void check_solvable() const {
    auto pack = [](const AgentState& s) {
      ByteWriter w;
      w.u8(static_cast<uint8_t>(s.row));
      w.u16(static_cast<uint16_t>(s.col));
      w.u32(s.keys);
      w.u32(s.doors);
      return fnv1a64(w.data());
    };
    std::unordered_set<uint64_t> seen;
    std::deque<AgentState> frontier;
    AgentState start;
    frontier.push_back(start);
    seen.insert(pack(start));
    while (!frontier.empty()) {
      AgentState s = frontier.front();
      frontier.pop_front();
      for (int a = 0; a < 4; ++a) {
        MoveResult m = apply_move(s, a);
        if (m.died) continue;
        if (m.treasure) return;
        uint64_t key = pack(m.state);
        if (seen.insert(key).second) frontier.push_back(m.state);
      }
    }
    throw UnsolvableLayout("key corridor: treasure unreachable under layout_seed " +
                           std::to_string(cfg_.layout_seed));
  }

  void reset_state() {
    agent_ = AgentState{};
    status_ = Status::Alive;
    done_ = false;
    has_prev_ = false;
    prev_action_ = 0;
    rng_state_ = derive_stream({0x4cu, cfg_.layout_seed});
  }

  KeyCorridorConfig cfg_;
  int total_cols_ = 0;
  std::vector<Cell> grid_;
  std::vector<int> cell_room_;

  AgentState agent_;
  Status status_ = Status::Alive;
  bool done_ = false;
  bool has_prev_ = false;
  uint8_t prev_action_ = 0;
  uint64_t rng_state_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_key_corridor(const KeyCorridorConfig& cfg) {
  return std::make_unique<KeyCorridorEnv>(cfg);
}

}  // namespace gowu
