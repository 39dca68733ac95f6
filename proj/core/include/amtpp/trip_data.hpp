// Trip ingestion and preparation: CSV loading, per-user sequences with
// inter-event times and calendar features, batch padding with loss masks,
// synthetic population generation, Lempel–Ziv entropy rates and user splits.
//
// Trip CSV schema: header `user_id,t,o,d`, comma separated, t in integer
// epoch seconds, o/d station ids in [0,S). Station-feature CSV schema:
// header `station_id,f_1,...,f_P`.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amtpp/tensor.hpp"

namespace amtpp {

struct TripRecord {
  std::string user_id;
  std::int64_t t = 0;   // departure, epoch seconds
  std::size_t o = 0;    // origin station
  std::size_t d = 0;    // destination station
};

struct UserSequence {
  std::string user_id;
  std::vector<TripRecord> trips;       // strictly increasing t
  std::vector<double> taus;            // hours; taus[i-1] = (t_i - t_{i-1})/3600, i >= 1
  std::vector<std::size_t> hours;      // hour of day per trip, 0..23
  std::vector<std::size_t> weekdays;   // day of week per trip, Monday=0 .. Sunday=6

  std::size_t size() const { return trips.size(); }
  // Flattened location sequence [o_1, d_1, o_2, d_2, ...].
  std::vector<std::size_t> location_sequence() const;
};

// Right-padded batch tensors. Targets at masked positions hold neutral
// placeholders (tau 1.0, station 0) that never reach any loss term.
struct PaddedBatch {
  std::size_t users = 0;        // B
  std::size_t steps = 0;        // T = max sequence length
  std::vector<std::size_t> lengths;
  std::vector<std::string> user_ids;
  Tensor taus;                  // B×T, hours; first column and padding hold 1.0
  Tensor log_taus;              // B×T, log of the above
  Tensor hours;                 // B×T
  Tensor weekdays;              // B×T
  Tensor origins;               // B×T, padding id S on padded steps
  Tensor dests;                 // B×T
  Tensor marker_mask;           // B×T, 1 on real trips
  Tensor time_mask;             // B×T, marker mask with each user's first trip zeroed
};

struct CalendarFeatures {
  std::size_t hour;
  std::size_t weekday;
};

// hour = floor(((t+offset) mod 86400)/3600), Euclidean mod;
// weekday counts days since the epoch with Monday=0 (1970-01-01 -> 3).
CalendarFeatures calendar_features(std::int64_t t, std::int64_t tz_offset_seconds);

UserSequence make_sequence(std::string user_id, std::vector<TripRecord> trips,
                           std::int64_t tz_offset_seconds);

// Loads and groups a trip CSV. Rejects o==d rows, station ids >= S and
// duplicate timestamps within a user, naming the offending row.
std::vector<UserSequence> load_csv(const std::string& path, std::size_t stations,
                                   std::int64_t tz_offset_seconds = 0);

void write_csv(const std::string& path, const std::vector<UserSequence>& sequences);

PaddedBatch pad_batch(const std::vector<const UserSequence*>& sequences, std::size_t stations);

enum class Archetype { kRoundTripCommuter, kMorningCommuter, kRandomTraveler };
const char* archetype_name(Archetype a);

struct SyntheticPopulationSpec {
  std::size_t users = 200;
  std::size_t stations = 10;
  std::size_t days = 30;
  double commuter_fraction = 0.6;
  double morning_fraction = 0.2;   // remainder are random travelers
  double morning_peak_hour = 8.0;
  double work_duration_peak_hours = 8.0;    // mode of the work-stay duration;
                                            // the home stay peaks at 24h minus this
  double duration_left_slope = 40.0;        // log-space tail slopes of stay durations:
  double duration_right_slope = 6.0;        // sharp floor, heavier overtime tail
  double departure_spread_hours = 0.25;
  double random_gap_mean_hours = 12.0;
  bool weekends_off = true;                 // commuting archetypes skip Sat/Sun
  double station_popularity_skew = 1.0;     // Zipf exponent for random travelers
  std::uint64_t seed = 0;
};

struct SyntheticPopulation {
  std::vector<UserSequence> sequences;
  std::vector<Archetype> archetypes;  // parallel to sequences
};

SyntheticPopulation generate_synthetic(const SyntheticPopulationSpec& spec);

// Lempel–Ziv entropy-rate estimate in bits per symbol:
//   (n / sum_i L_i) * log2(n)
// where L_i is the length of the shortest substring starting at i that does
// not occur inside the strict prefix s[0..i-1] (one past the suffix length
// when every such substring occurs). Requires n >= 2.
double lz_entropy_rate(const std::vector<std::size_t>& symbols);

struct UserSplit {
  std::vector<UserSequence> train;
  std::vector<UserSequence> validation;
};

UserSplit split_users(std::vector<UserSequence> sequences, double train_fraction,
                      std::uint64_t seed);

// Optional per-station features; column k of the returned (S+1)×P tensor
// layout holds feature f_k, the padding station row is zero.
Tensor load_station_features(const std::string& path, std::size_t stations);

}  // namespace amtpp
