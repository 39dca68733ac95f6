#include "amtpp/trip_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "amtpp/rng.hpp"

namespace amtpp {

namespace {

[[noreturn]] void data_error(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

// Inverse-CDF draw from an asymmetric Laplace in log space around log(peak):
// left slope `left`, right slope `right`, returned in linear (hours) space.
double draw_peaked_duration(Rng& rng, double peak_hours, double left, double right) {
  double p_left = right / (left + right);
  double u = rng.uniform();
  double y;
  if (u < p_left)
    y = std::log(peak_hours) + std::log(u / p_left) / left;
  else
    y = std::log(peak_hours) - std::log((1.0 - u) / (1.0 - p_left)) / right;
  return std::exp(y);
}

}  // namespace

CalendarFeatures calendar_features(std::int64_t t, std::int64_t tz_offset_seconds) {
  std::int64_t local = t + tz_offset_seconds;
  std::int64_t sec_of_day = floor_mod(local, 86400);
  std::int64_t day = floor_div(local, 86400);
  return {static_cast<std::size_t>(sec_of_day / 3600),
          static_cast<std::size_t>(floor_mod(day + 3, 7))};  // 1970-01-01 is a Thursday
}

std::vector<std::size_t> UserSequence::location_sequence() const {
  std::vector<std::size_t> out;
  out.reserve(trips.size() * 2);
  for (const auto& tr : trips) {
    out.push_back(tr.o);
    out.push_back(tr.d);
  }
  return out;
}

UserSequence make_sequence(std::string user_id, std::vector<TripRecord> trips,
                           std::int64_t tz_offset_seconds) {
  std::stable_sort(trips.begin(), trips.end(),
                   [](const TripRecord& a, const TripRecord& b) { return a.t < b.t; });
  for (std::size_t i = 1; i < trips.size(); ++i)
    if (trips[i].t == trips[i - 1].t)
      data_error("user '" + user_id + "': duplicate timestamp " + std::to_string(trips[i].t));
  UserSequence seq;
  seq.user_id = std::move(user_id);
  seq.taus.reserve(trips.size() > 0 ? trips.size() - 1 : 0);
  seq.hours.reserve(trips.size());
  seq.weekdays.reserve(trips.size());
  for (std::size_t i = 0; i < trips.size(); ++i) {
    auto cal = calendar_features(trips[i].t, tz_offset_seconds);
    seq.hours.push_back(cal.hour);
    seq.weekdays.push_back(cal.weekday);
    if (i > 0) seq.taus.push_back(static_cast<double>(trips[i].t - trips[i - 1].t) / 3600.0);
  }
  seq.trips = std::move(trips);
  return seq;
}

std::vector<UserSequence> load_csv(const std::string& path, std::size_t stations,
                                   std::int64_t tz_offset_seconds) {
  std::ifstream in(path);
  if (!in) data_error("cannot open trip CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) data_error("empty trip CSV '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "user_id,t,o,d")
    data_error("trip CSV '" + path + "': expected header 'user_id,t,o,d', got '" + line + "'");

  std::map<std::string, std::vector<TripRecord>> by_user;
  std::vector<std::string> order;  // first-appearance order of users
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != 4)
      data_error("trip CSV '" + path + "' row " + std::to_string(row) + ": expected 4 fields");
    TripRecord rec;
    rec.user_id = fields[0];
    try {
      rec.t = std::stoll(fields[1]);
      rec.o = static_cast<std::size_t>(std::stoull(fields[2]));
      rec.d = static_cast<std::size_t>(std::stoull(fields[3]));
    } catch (const std::exception&) {
      data_error("trip CSV '" + path + "' row " + std::to_string(row) + ": malformed number");
    }
    if (rec.o == rec.d)
      data_error("trip CSV '" + path + "' row " + std::to_string(row) +
                 ": origin equals destination (" + std::to_string(rec.o) + ")");
    if (rec.o >= stations || rec.d >= stations)
      data_error("trip CSV '" + path + "' row " + std::to_string(row) + ": station id " +
                 std::to_string(std::max(rec.o, rec.d)) + " outside [0," +
                 std::to_string(stations) + ")");
    auto [it, fresh] = by_user.try_emplace(rec.user_id);
    if (fresh) order.push_back(rec.user_id);
    it->second.push_back(rec);
  }
  std::vector<UserSequence> out;
  out.reserve(order.size());
  for (const auto& uid : order)
    out.push_back(make_sequence(uid, std::move(by_user[uid]), tz_offset_seconds));
  return out;
}

void write_csv(const std::string& path, const std::vector<UserSequence>& sequences) {
  std::ofstream outf(path);
  if (!outf) data_error("cannot write trip CSV '" + path + "'");
  outf << "user_id,t,o,d\n";
  for (const auto& seq : sequences)
    for (const auto& tr : seq.trips)
      outf << seq.user_id << ',' << tr.t << ',' << tr.o << ',' << tr.d << '\n';
  if (!outf) data_error("write failed for trip CSV '" + path + "'");
}

PaddedBatch pad_batch(const std::vector<const UserSequence*>& sequences, std::size_t stations) {
  if (sequences.empty()) throw std::invalid_argument("pad_batch: empty batch");
  PaddedBatch b;
  b.users = sequences.size();
  for (const auto* s : sequences) b.steps = std::max(b.steps, s->size());
  std::size_t n = b.users * b.steps;
  std::vector<double> taus(n, 1.0), log_taus(n, 0.0), hours(n, 0.0), weekdays(n, 0.0);
  std::vector<double> origins(n, static_cast<double>(stations)),
      dests(n, static_cast<double>(stations));
  std::vector<double> marker(n, 0.0), time_mask(n, 0.0);
  for (std::size_t u = 0; u < b.users; ++u) {
    const UserSequence& s = *sequences[u];
    b.lengths.push_back(s.size());
    b.user_ids.push_back(s.user_id);
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::size_t k = u * b.steps + i;
      if (i > 0) {
        taus[k] = s.taus[i - 1];
        log_taus[k] = std::log(s.taus[i - 1]);
        time_mask[k] = 1.0;
      }
      hours[k] = static_cast<double>(s.hours[i]);
      weekdays[k] = static_cast<double>(s.weekdays[i]);
      origins[k] = static_cast<double>(s.trips[i].o);
      dests[k] = static_cast<double>(s.trips[i].d);
      marker[k] = 1.0;
    }
  }
  Shape shape{b.users, b.steps};
  b.taus = Tensor::from_values(shape, std::move(taus));
  b.log_taus = Tensor::from_values(shape, std::move(log_taus));
  b.hours = Tensor::from_values(shape, std::move(hours));
  b.weekdays = Tensor::from_values(shape, std::move(weekdays));
  b.origins = Tensor::from_values(shape, std::move(origins));
  b.dests = Tensor::from_values(shape, std::move(dests));
  b.marker_mask = Tensor::from_values(shape, std::move(marker));
  b.time_mask = Tensor::from_values(shape, std::move(time_mask));
  return b;
}

const char* archetype_name(Archetype a) {
  switch (a) {
    case Archetype::kRoundTripCommuter: return "round_trip_commuter";
    case Archetype::kMorningCommuter: return "morning_commuter";
    case Archetype::kRandomTraveler: return "random_traveler";
  }
  return "unknown";
}

SyntheticPopulation generate_synthetic(const SyntheticPopulationSpec& spec) {
  if (spec.stations < 2) throw std::invalid_argument("generate_synthetic: need >= 2 stations");
  if (spec.commuter_fraction + spec.morning_fraction > 1.0 + 1e-12)
    throw std::invalid_argument("generate_synthetic: archetype fractions exceed 1");

  // Zipf-ish station popularity used by random travelers.
  std::vector<double> popularity(spec.stations);
  double norm = 0.0;
  for (std::size_t s = 0; s < spec.stations; ++s) {
    popularity[s] = 1.0 / std::pow(static_cast<double>(s + 1), spec.station_popularity_skew);
    norm += popularity[s];
  }
  for (double& p : popularity) p /= norm;

  Rng base(spec.seed);
  SyntheticPopulation pop;
  pop.sequences.reserve(spec.users);
  pop.archetypes.reserve(spec.users);

  const std::int64_t kStartEpoch = 4 * 86400;  // 1970-01-05, a Monday
  std::size_t n_commuter = static_cast<std::size_t>(std::llround(
      spec.commuter_fraction * static_cast<double>(spec.users)));
  std::size_t n_morning = static_cast<std::size_t>(std::llround(
      spec.morning_fraction * static_cast<double>(spec.users)));
  n_commuter = std::min(n_commuter, spec.users);
  n_morning = std::min(n_morning, spec.users - n_commuter);

  for (std::size_t u = 0; u < spec.users; ++u) {
    Rng rng = base.fork(u);
    Archetype kind = u < n_commuter               ? Archetype::kRoundTripCommuter
                     : u < n_commuter + n_morning ? Archetype::kMorningCommuter
                                                  : Archetype::kRandomTraveler;
    std::string uid = "u" + std::to_string(u);
    std::vector<TripRecord> trips;

    if (kind == Archetype::kRandomTraveler) {
      double t_hours = rng.uniform(0.0, 24.0);
      double horizon = static_cast<double>(spec.days) * 24.0;
      while (true) {
        t_hours += rng.exponential(spec.random_gap_mean_hours);
        if (t_hours >= horizon) break;
        std::size_t o = 0, d = 0;
        auto draw_station = [&]() {
          double x = rng.uniform();
          double acc = 0.0;
          for (std::size_t s = 0; s < spec.stations; ++s) {
            acc += popularity[s];
            if (x < acc) return s;
          }
          return spec.stations - 1;
        };
        o = draw_station();
        do { d = draw_station(); } while (d == o);
        trips.push_back({uid, kStartEpoch + static_cast<std::int64_t>(t_hours * 3600.0), o, d});
      }
    } else {
      std::size_t home = static_cast<std::size_t>(rng.uniform_int(spec.stations));
      std::size_t work;
      do { work = static_cast<std::size_t>(rng.uniform_int(spec.stations)); } while (work == home);
      for (std::size_t day = 0; day < spec.days; ++day) {
        if (spec.weekends_off && (day % 7 == 5 || day % 7 == 6)) continue;
        double depart_slope = spec.morning_peak_hour / spec.departure_spread_hours;
        double depart = draw_peaked_duration(rng, spec.morning_peak_hour,
                                             2.0 * depart_slope, depart_slope);
        double m_hours = static_cast<double>(day) * 24.0 + depart;
        std::int64_t m_t = kStartEpoch + static_cast<std::int64_t>(m_hours * 3600.0);
        trips.push_back({uid, m_t, home, work});
        if (kind == Archetype::kRoundTripCommuter) {
          double dur = draw_peaked_duration(rng, spec.work_duration_peak_hours,
                                            spec.duration_left_slope,
                                            spec.duration_right_slope);
          // Extreme overtime draws must still precede the next morning trip.
          dur = std::min(dur, 29.5 - depart);
          std::int64_t e_t = m_t + static_cast<std::int64_t>(dur * 3600.0);
          trips.push_back({uid, e_t, work, home});
        }
      }
    }
    if (trips.empty()) continue;
    // Guard against pathological draws colliding on a second.
    for (std::size_t i = 1; i < trips.size(); ++i)
      if (trips[i].t <= trips[i - 1].t) trips[i].t = trips[i - 1].t + 60;
    pop.sequences.push_back(make_sequence(uid, std::move(trips), 0));
    pop.archetypes.push_back(kind);
  }
  return pop;
}

double lz_entropy_rate(const std::vector<std::size_t>& symbols) {
  std::size_t n = symbols.size();
  if (n < 2)
    throw std::invalid_argument("lz_entropy_rate: sequence must have length >= 2");
  // Lambda_i = shortest substring starting at i absent from the strict
  // prefix; equals (suffix length + 1) if every candidate occurs. Longest
  // match against prefix positions, scanned incrementally.
  double lambda_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t longest = 0;  // longest substring at i fully inside prefix and seen before
    for (std::size_t j = 0; j < i; ++j) {
      std::size_t len = 0;
      while (j + len < i && i + len < n && symbols[j + len] == symbols[i + len]) ++len;
      longest = std::max(longest, len);
    }
    std::size_t max_candidate = n - i;  // suffix length
    lambda_sum += static_cast<double>(std::min(longest + 1, max_candidate + 1));
  }
  return (static_cast<double>(n) * std::log2(static_cast<double>(n))) / lambda_sum;
}

UserSplit split_users(std::vector<UserSequence> sequences, double train_fraction,
                      std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split_users: fraction must be in (0,1)");
  std::vector<std::size_t> idx(sequences.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(sequences.size())));
  if (n_train == 0 || n_train == sequences.size())
    throw std::invalid_argument("split_users: split leaves an empty side");
  UserSplit split;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto& dst = i < n_train ? split.train : split.validation;
    dst.push_back(std::move(sequences[idx[i]]));
  }
  auto by_id = [](const UserSequence& a, const UserSequence& b) { return a.user_id < b.user_id; };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.validation.begin(), split.validation.end(), by_id);
  return split;
}

Tensor load_station_features(const std::string& path, std::size_t stations) {
  std::ifstream in(path);
  if (!in) data_error("cannot open station-feature CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) data_error("empty station-feature CSV '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_line(line);
  if (header.empty() || header[0] != "station_id")
    data_error("station-feature CSV '" + path + "': first column must be station_id");
  std::size_t P = header.size() - 1;
  if (P == 0) data_error("station-feature CSV '" + path + "': no feature columns");
  std::vector<double> table((stations + 1) * P, 0.0);  // padding station row stays zero
  std::vector<bool> seen(stations, false);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != P + 1)
      data_error("station-feature CSV '" + path + "' row " + std::to_string(row) +
                 ": expected " + std::to_string(P + 1) + " fields");
    std::size_t sid = static_cast<std::size_t>(std::stoull(fields[0]));
    if (sid >= stations)
      data_error("station-feature CSV '" + path + "' row " + std::to_string(row) +
                 ": station id out of range");
    seen[sid] = true;
    for (std::size_t k = 0; k < P; ++k) table[sid * P + k] = std::stod(fields[k + 1]);
  }
  for (std::size_t s = 0; s < stations; ++s)
    if (!seen[s])
      data_error("station-feature CSV '" + path + "': missing station " + std::to_string(s));
  return Tensor::from_values({stations + 1, P}, std::move(table));
}

}  // namespace amtpp
