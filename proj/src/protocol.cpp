#include "gowu/protocol.hpp"

#include <algorithm>
#include <thread>
#include <unordered_map>

namespace gowu {

namespace {

void write_header(ByteWriter& w, wire::MsgType type) {
  w.magic(wire::kMagic);
  w.u8(wire::kVersion);
  w.u8(static_cast<uint8_t>(type));
}

// Validates the header and returns (type, payload reader's span).
std::pair<wire::MsgType, std::span<const uint8_t>> open_frame(
    std::span<const uint8_t> frame) {
  ByteReader r(frame);
  r.expect_magic(wire::kMagic, "rollout frame");
  uint8_t version = r.u8();
  if (version != wire::kVersion)
    throw DecodeError("rollout frame: version mismatch, got " +
                      std::to_string(version) + ", expected " +
                      std::to_string(wire::kVersion));
  uint8_t type = r.u8();
  if (type < 1 || type > 3)
    throw DecodeError("rollout frame: unknown message type " + std::to_string(type));
  uint32_t len = r.u32();
  if (len != r.remaining())
    throw DecodeError("rollout frame: payload length " + std::to_string(len) +
                      " does not match remaining " + std::to_string(r.remaining()));
  return {static_cast<wire::MsgType>(type),
          frame.subspan(frame.size() - r.remaining())};
}

void write_snapshot(ByteWriter& w, const Snapshot& s) {
  w.u8(static_cast<uint8_t>(s.env_kind));
  w.sized_bytes(s.blob);
}

Snapshot read_snapshot(ByteReader& r) {
  Snapshot s;
  uint8_t kind = r.u8();
  if (kind < 1 || kind > 3)
    throw DecodeError("rollout frame: unknown environment kind " + std::to_string(kind));
  s.env_kind = static_cast<EnvKind>(kind);
  s.blob = r.sized_bytes();
  return s;
}

std::vector<uint8_t> seal(ByteWriter&& payload, wire::MsgType type) {
  std::vector<uint8_t> body = payload.take();
  ByteWriter w;
  write_header(w, type);
  w.u32(static_cast<uint32_t>(body.size()));
  w.bytes(body);
  return w.take();
}

}  // namespace

std::vector<uint8_t> encode_request(const RolloutRequest& req) {
  ByteWriter p;
  p.u64(req.request_id);
  p.u32(req.group_index);
  p.u32(req.member_index);
  p.u32(req.step_budget);
  p.u64(req.rng_stream_key);
  p.u8(static_cast<uint8_t>(req.policy.kind));
  p.f64(req.policy.epsilon);
  write_snapshot(p, req.start);
  p.sized_bytes({});  // reserved: policy parameters
  return seal(std::move(p), wire::MsgType::Request);
}

RolloutRequest decode_request(std::span<const uint8_t> frame) {
  auto [type, payload] = open_frame(frame);
  if (type != wire::MsgType::Request)
    throw DecodeError("rollout frame: expected a request");
  ByteReader r(payload);
  RolloutRequest req;
  req.request_id = r.u64();
  req.group_index = r.u32();
  req.member_index = r.u32();
  req.step_budget = r.u32();
  req.rng_stream_key = r.u64();
  uint8_t pk = r.u8();
  if (pk > 1) throw DecodeError("rollout frame: unknown policy kind " + std::to_string(pk));
  req.policy.kind = static_cast<PolicyKind>(pk);
  req.policy.epsilon = r.f64();
  req.start = read_snapshot(r);
  (void)r.sized_bytes();  // reserved: policy parameters
  if (!r.at_end()) throw DecodeError("rollout frame: trailing bytes after request");
  return req;
}

std::vector<uint8_t> encode_response(const RolloutResponse& resp) {
  ByteWriter p;
  p.u64(resp.request_id);
  p.u32(static_cast<uint32_t>(resp.outcome.steps_taken));
  p.f64(resp.outcome.reward_delta);
  p.u8(static_cast<uint8_t>(resp.outcome.final_status));
  write_snapshot(p, resp.outcome.end_snapshot);
  p.sized_bytes(resp.outcome.end_observation.bytes);
  p.u32(static_cast<uint32_t>(resp.outcome.observations_seen.size()));
  for (const auto& obs : resp.outcome.observations_seen) p.sized_bytes(obs.bytes);
  return seal(std::move(p), wire::MsgType::Response);
}

RolloutResponse decode_response(std::span<const uint8_t> frame) {
  auto [type, payload] = open_frame(frame);
  ByteReader r(payload);
  if (type == wire::MsgType::Error) {
    uint64_t id = r.u64();
    uint16_t code = r.u16();
    auto msg_bytes = r.sized_bytes();
    throw RemoteError("worker error on request " + std::to_string(id) + " (code " +
                      std::to_string(code) + "): " +
                      std::string(msg_bytes.begin(), msg_bytes.end()));
  }
  if (type != wire::MsgType::Response)
    throw DecodeError("rollout frame: expected a response");
  RolloutResponse resp;
  resp.request_id = r.u64();
  resp.outcome.steps_taken = static_cast<int>(r.u32());
  resp.outcome.reward_delta = r.f64();
  uint8_t status = r.u8();
  if (status > 1) throw DecodeError("rollout frame: unknown status " + std::to_string(status));
  resp.outcome.final_status = static_cast<Status>(status);
  resp.outcome.end_snapshot = read_snapshot(r);
  resp.outcome.end_observation = Observation::from_bytes(r.sized_bytes());
  uint32_t n = r.u32();
  resp.outcome.observations_seen.reserve(n);
  for (uint32_t i = 0; i < n; ++i)
    resp.outcome.observations_seen.push_back(Observation::from_bytes(r.sized_bytes()));
  if (!r.at_end()) throw DecodeError("rollout frame: trailing bytes after response");
  return resp;
}

std::vector<uint8_t> encode_error(uint64_t request_id, uint16_t code,
                                  const std::string& message) {
  ByteWriter p;
  p.u64(request_id);
  p.u16(code);
  p.sized_bytes(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(message.data()), message.size()));
  return seal(std::move(p), wire::MsgType::Error);
}

wire::MsgType frame_type(std::span<const uint8_t> frame) {
  return open_frame(frame).first;
}

RolloutResponse serve_rollout(const RolloutRequest& req, Env& env) {
  env.restore(req.start);
  Particle scratch;
  scratch.snapshot = req.start;
  scratch.observation = env.observe();
  Rng rng(req.rng_stream_key);
  RolloutResponse resp;
  resp.request_id = req.request_id;
  resp.outcome = rollout(scratch, static_cast<int>(req.step_budget), req.policy,
                         /*estimator=*/nullptr, env, rng);
  return resp;
}

ProtocolBackend::ProtocolBackend(EnvFactory factory, int workers)
    : factory_(std::move(factory)), workers_(workers) {
  if (workers_ < 1) throw ConfigError("protocol backend: workers must be >= 1");
}

std::vector<RolloutResponse> ProtocolBackend::run_batch(
    const std::vector<RolloutRequest>& requests) {
  std::vector<std::vector<uint8_t>> request_frames;
  request_frames.reserve(requests.size());
  for (const auto& req : requests) request_frames.push_back(encode_request(req));

  std::vector<std::vector<uint8_t>> response_frames(requests.size());
  auto serve_slice = [&](int worker) {
    // Worker-local environment; requests are striped across workers. Each
    // frame yields exactly one frame back, so the barrier below is total.
    std::unique_ptr<Env> env = factory_();
    for (size_t i = static_cast<size_t>(worker); i < request_frames.size();
         i += static_cast<size_t>(workers_)) {
      uint64_t id = 0;
      try {
        RolloutRequest req = decode_request(request_frames[i]);
        id = req.request_id;
        response_frames[i] = encode_response(serve_rollout(req, *env));
      } catch (const DecodeError& e) {
        response_frames[i] = encode_error(id, wire::kCodeDecode, e.what());
      } catch (const Error& e) {
        response_frames[i] = encode_error(id, wire::kCodeEnvironment, e.what());
      }
    }
  };

  if (workers_ == 1) {
    serve_slice(0);
  } else {
    std::vector<std::thread> pool;
    int active = std::min<int>(workers_, static_cast<int>(requests.size()));
    pool.reserve(static_cast<size_t>(active));
    for (int w = 0; w < active; ++w) pool.emplace_back(serve_slice, w);
    for (auto& t : pool) t.join();
  }

  // Decode and return in request order, matching on request_id.
  std::unordered_map<uint64_t, size_t> position;
  position.reserve(requests.size());
  for (size_t i = 0; i < requests.size(); ++i) position[requests[i].request_id] = i;
  std::vector<RolloutResponse> ordered(requests.size());
  std::vector<bool> filled(requests.size(), false);
  for (const auto& frame : response_frames) {
    RolloutResponse resp = decode_response(frame);
    auto it = position.find(resp.request_id);
    if (it == position.end())
      throw RemoteError("worker answered an unknown request id " +
                        std::to_string(resp.request_id));
    if (filled[it->second])
      throw RemoteError("duplicate response for request id " +
                        std::to_string(resp.request_id));
    ordered[it->second] = std::move(resp);
    filled[it->second] = true;
  }
  for (size_t i = 0; i < filled.size(); ++i)
    if (!filled[i])
      throw RemoteError("missing response for request id " +
                        std::to_string(requests[i].request_id));
  return ordered;
}

}  // namespace gowu
