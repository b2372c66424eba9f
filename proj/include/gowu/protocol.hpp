#pragma once

#include <span>
#include <vector>

#include "gowu/engine.hpp"
#include "gowu/env.hpp"
#include "gowu/rollout_msg.hpp"

namespace gowu {

// A worker-side failure carried back across the wire.
struct RemoteError : Error { using Error::Error; };

namespace wire {

constexpr char kMagic[4] = {'G', 'W', 'R', 'P'};
constexpr uint8_t kVersion = 1;

enum class MsgType : uint8_t { Request = 1, Response = 2, Error = 3 };

// Worker-side error codes carried in error frames.
constexpr uint16_t kCodeEnvironment = 1;
constexpr uint16_t kCodeDecode = 2;

}  // namespace wire

// Length-prefixed versioned binary frames. Field order is fixed; every frame
// is magic + version + type + u32 payload length + payload. A request payload
// ends with a reserved sized extension field (empty today) so policy
// parameters can ride along later without a version bump.
std::vector<uint8_t> encode_request(const RolloutRequest& req);
RolloutRequest decode_request(std::span<const uint8_t> frame);
std::vector<uint8_t> encode_response(const RolloutResponse& resp);
// Decodes a response frame. An error frame decodes into a RemoteError throw
// carrying the worker's code and message.
RolloutResponse decode_response(std::span<const uint8_t> frame);
std::vector<uint8_t> encode_error(uint64_t request_id, uint16_t code,
                                  const std::string& message);
wire::MsgType frame_type(std::span<const uint8_t> frame);

// Stateless worker entry point: restores the environment to the request's
// checkpoint, replays the rollout under the request's seeded stream, and
// reports the endpoint. No state survives between calls; the estimator is
// fed coordinator-side from observations_seen.
RolloutResponse serve_rollout(const RolloutRequest& req, Env& env);

// Rollout executor that pushes every request through the byte codec, serves
// it on a worker (each with a private environment instance), and decodes the
// response frames back, reordered to request order. With workers=1 everything
// runs inline on the calling thread.
class ProtocolBackend final : public RolloutBackend {
 public:
  explicit ProtocolBackend(EnvFactory factory, int workers = 1);

  std::vector<RolloutResponse> run_batch(const std::vector<RolloutRequest>& requests) override;
  bool applies_estimator_updates() const override { return false; }

 private:
  EnvFactory factory_;
  int workers_;
};

}  // namespace gowu
