// Copyright 2026 The crnn-asr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "crnn/dataset.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>

#include "crnn/config.hpp"
#include "crnn/ctc.hpp"
#include "crnn/model.hpp"

namespace crnn {
namespace {

const Alphabet& kAlphabet = default_alphabet();

std::vector<Utterance> dummy_corpus(int n) {
  std::vector<Utterance> utts(n);
  for (int i = 0; i < n; ++i) {
    utts[i].transcript = "utt" + std::to_string(i);
    utts[i].audio.samples.assign(200, 0.0);
  }
  return utts;
}

TEST(Encode, MapsLettersSpacesAndApostrophes) {
  const auto indices = encode_transcript("ab", kAlphabet);
  EXPECT_EQ(indices, (std::vector<int>{0, 1}));
  const auto mixed = encode_transcript("Ab!", kAlphabet);
  EXPECT_EQ(mixed, (std::vector<int>{0, 1, kAlphabet.unk_index()}));
  const auto full = encode_transcript("don't stop", kAlphabet);
  EXPECT_EQ(full[3], kAlphabet.apostrophe_index());
  EXPECT_EQ(full[5], kAlphabet.space_index());
}

TEST(Encode, RoundTripDecodesToCasefoldedTextWithUnkMarkers) {
  const std::string text = "Hello, World's";
  const auto indices = encode_transcript(text, kAlphabet);
  EXPECT_EQ(kAlphabet.decode(indices), "hello<UNK> world's");
  for (int idx : indices) EXPECT_NE(idx, kAlphabet.blank_index());
}

TEST(Encode, EmptyTranscriptThrows) {
  EXPECT_THROW(encode_transcript("", kAlphabet), DataError);
}

TEST(Split, HundredUtterancesGoEightyTenTen) {
  SplitSpec spec;
  spec.seed = 5;
  const auto split = split_dataset(dummy_corpus(100), spec);
  EXPECT_EQ(split.train.size(), 80u);
  EXPECT_EQ(split.dev.size(), 10u);
  EXPECT_EQ(split.test.size(), 10u);
}

TEST(Split, DeterministicPerSeedAndSensitiveToIt) {
  SplitSpec spec;
  spec.seed = 7;
  const auto a = split_dataset(dummy_corpus(40), spec);
  const auto b = split_dataset(dummy_corpus(40), spec);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i)
    EXPECT_EQ(a.train[i].transcript, b.train[i].transcript);

  spec.seed = 8;
  const auto c = split_dataset(dummy_corpus(40), spec);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.train.size(); ++i)
    any_difference |= a.train[i].transcript != c.train[i].transcript;
  EXPECT_TRUE(any_difference);
}

TEST(Split, PartitionsTheInputExactly) {
  SplitSpec spec;
  spec.seed = 9;
  const int n = 53;
  const auto split = split_dataset(dummy_corpus(n), spec);
  std::multiset<std::string> seen;
  for (const auto* part : {&split.train, &split.dev, &split.test})
    for (const auto& utt : *part) seen.insert(utt.transcript);
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(n));
  std::multiset<std::string> expected;
  for (const auto& utt : dummy_corpus(n)) expected.insert(utt.transcript);
  EXPECT_EQ(seen, expected);
}

TEST(Split, TooFewUtterancesThrows) {
  SplitSpec spec;
  EXPECT_THROW(split_dataset(dummy_corpus(9), spec), DataError);
  EXPECT_NO_THROW(split_dataset(dummy_corpus(10), spec));
}

TEST(Batches, SplitsIntoExpectedSizesAndPadsWithZeros) {
  std::vector<Mat> feats;
  std::vector<std::vector<int>> labels;
  for (int i = 0; i < 5; ++i) {
    feats.push_back(Mat::Constant(10 + 5 * i, 81, 1.0));
    labels.push_back({i});
  }
  const auto batches = make_batches_from_features(feats, labels, 2, 3);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 2);
  EXPECT_EQ(batches[1].size(), 2);
  EXPECT_EQ(batches[2].size(), 1);

  for (const auto& batch : batches) {
    for (int i = 0; i < batch.size(); ++i) {
      const Mat& padded = batch.features[i];
      EXPECT_EQ(padded.rows(), batch.max_frames);
      const int true_len = batch.frame_lengths[i];
      if (true_len < batch.max_frames) {
        EXPECT_EQ(padded.bottomRows(batch.max_frames - true_len)
                      .cwiseAbs()
                      .maxCoeff(),
                  0.0);
      }
      EXPECT_EQ(padded.topRows(true_len).minCoeff(), 1.0);
    }
  }
}

TEST(Batches, ShuffleIsDeterministicPerSeed) {
  std::vector<Mat> feats;
  std::vector<std::vector<int>> labels;
  for (int i = 0; i < 12; ++i) {
    feats.push_back(Mat::Constant(5, 3, static_cast<double>(i)));
    labels.push_back({i % 4});
  }
  const auto a = make_batches_from_features(feats, labels, 4, 11);
  const auto b = make_batches_from_features(feats, labels, 4, 11);
  const auto c = make_batches_from_features(feats, labels, 4, 12);
  ASSERT_EQ(a.size(), b.size());
  bool same_order_ab = true, same_order_ac = true;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (int i = 0; i < a[k].size(); ++i) {
      same_order_ab &= a[k].features[i] == b[k].features[i];
      same_order_ac &= a[k].features[i] == c[k].features[i];
    }
  }
  EXPECT_TRUE(same_order_ab);
  EXPECT_FALSE(same_order_ac);
}

TEST(Batches, SkipsUtterancesWhoseLabelCannotAlign) {
  std::vector<Mat> feats = {Mat::Constant(50, 81, 0.5),
                            Mat::Constant(4, 81, 0.5)};
  std::vector<std::vector<int>> labels = {{0, 1}, {0, 1, 2, 3, 4, 5}};
  int skipped = 0;
  // a conv-like reduction: floor((T-11)/2)+1, too-short inputs collapse
  const auto reduce = [](int frames) {
    return conv_output_length(frames, 11, 2, Padding::kValid);
  };
  const auto batches =
      make_batches_from_features(feats, labels, 4, 1, reduce, &skipped);
  EXPECT_EQ(skipped, 1);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].size(), 1);
  EXPECT_EQ(batches[0].labels[0], (std::vector<int>{0, 1}));
}

TEST(Batches, PaddingIsNeutralForPerUtteranceLosses) {
  // CTC losses computed per utterance on true lengths must match losses
  // computed from the padded batch sliced back to true lengths.
  Rng rng(21);
  CrnnConfig config;
  config.filters = 4;
  config.kernel = 3;
  config.stride = 1;
  config.gru_layers = 1;
  config.gru_hidden = 3;
  config.dropout = 0.0;
  const CrnnModel model = build_crnn(config, 31);

  std::vector<Mat> feats;
  std::vector<std::vector<int>> labels = {{0, 1, 2}, {3, 4}, {5}};
  for (const int t_len : {20, 14, 9}) {
    Mat m(t_len, 81);
    for (int i = 0; i < t_len; ++i)
      for (int j = 0; j < 81; ++j) m(i, j) = rng.gaussian();
    feats.push_back(m);
  }

  double unbatched_total = 0.0;
  for (int i = 0; i < 3; ++i) {
    Rng fwd_rng(0);
    const Mat log_probs = crnn_forward(model, feats[i], false, fwd_rng);
    unbatched_total +=
        ctc_loss(log_probs, labels[i], kAlphabet.blank_index()).first;
  }

  const auto batches = make_batches_from_features(feats, labels, 3, 77);
  ASSERT_EQ(batches.size(), 1u);
  double batched_total = 0.0;
  const Batch& batch = batches[0];
  for (int i = 0; i < batch.size(); ++i) {
    const Mat sliced = batch.features[i].topRows(batch.frame_lengths[i]);
    Rng fwd_rng(0);
    const Mat log_probs = crnn_forward(model, sliced, false, fwd_rng);
    batched_total +=
        ctc_loss(log_probs, batch.labels[i], kAlphabet.blank_index()).first;
  }
  EXPECT_NEAR(batched_total, unbatched_total, 1e-9);
}

TEST(Synth, DurationArithmetic) {
  SynthSpec spec;
  spec.count = 1;
  spec.min_chars = 2;
  spec.max_chars = 2;
  spec.char_duration_ms = 100;
  spec.seed = 3;
  const auto utts = generate_synthetic(spec);
  ASSERT_EQ(utts.size(), 1u);
  EXPECT_EQ(utts[0].transcript.size(), 2u);
  EXPECT_EQ(utts[0].audio.samples.size(), 3200u);  // 2 chars * 100 ms * 16 kHz
}

TEST(Synth, SameSeedSameCorpusDifferentSeedDifferent) {
  SynthSpec spec;
  spec.count = 5;
  spec.seed = 42;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].transcript, b[i].transcript);
    EXPECT_EQ(a[i].audio.samples, b[i].audio.samples);
  }
  spec.seed = 43;
  const auto c = generate_synthetic(spec);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    differs |= a[i].transcript != c[i].transcript;
  EXPECT_TRUE(differs);
}

TEST(Synth, TonePairsAreDistinctAndBelowNyquist) {
  std::set<std::pair<double, double>> pairs;
  for (int i = 0; i < 29; ++i) {
    const auto pair = synth_tone_pair(i);
    EXPECT_LT(pair.first, 8000.0);
    EXPECT_LT(pair.second, 8000.0);
    EXPECT_NE(pair.first, pair.second);
    pairs.insert(pair);
  }
  EXPECT_EQ(pairs.size(), 29u);
}

TEST(Synth, SingleCharacterSpectrumPeaksAtItsTwoBins) {
  SynthSpec spec;
  spec.noise_amplitude = 0.05;
  Rng rng(17);
  const int symbol = kAlphabet.index_of('q');
  std::vector<double> samples;
  synth_append_character(samples, symbol, spec, rng);
  AudioClip clip;
  clip.samples = samples;
  const Spectrogram spec_gram = compute_spectrogram(clip);

  const Vec mean_spectrum = spec_gram.frames.colwise().mean().transpose();
  // top two bins, by brute force
  int first = 0, second = 1;
  if (mean_spectrum[second] > mean_spectrum[first]) std::swap(first, second);
  for (int b = 2; b < 81; ++b) {
    if (mean_spectrum[b] > mean_spectrum[first]) {
      second = first;
      first = b;
    } else if (mean_spectrum[b] > mean_spectrum[second]) {
      second = b;
    }
  }
  const auto [low, high] = synth_tone_pair(symbol);
  const std::set<int> expected = {static_cast<int>(low / 100.0),
                                  static_cast<int>(high / 100.0)};
  EXPECT_EQ((std::set<int>{first, second}), expected);
}

TEST(Synth, TranscriptsUseOnlyLettersAndInternalSingleSpaces) {
  SynthSpec spec;
  spec.count = 200;
  spec.space_probability = 0.3;
  spec.seed = 11;
  for (const auto& utt : generate_synthetic(spec)) {
    EXPECT_GE(utt.transcript.size(), 3u);
    EXPECT_LE(utt.transcript.size(), 8u);
    EXPECT_NE(utt.transcript.front(), ' ');
    EXPECT_NE(utt.transcript.back(), ' ');
    EXPECT_EQ(utt.transcript.find("  "), std::string::npos);
    for (char c : utt.transcript)
      EXPECT_TRUE((c >= 'a' && c <= 'z') || c == ' ') << utt.transcript;
  }
}

TEST(Manifest, WriteReadRoundTrip) {
  const std::string dir = testing::TempDir();
  SynthSpec spec;
  spec.count = 3;
  spec.seed = 5;
  const auto utts = generate_synthetic(spec);
  std::vector<std::pair<std::string, std::string>> rows;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const std::string wav = "clip" + std::to_string(i) + ".wav";
    write_wav(dir + "/" + wav, utts[i].audio);
    rows.emplace_back(wav, utts[i].transcript);  // relative paths
  }
  const std::string manifest = dir + "/manifest.tsv";
  write_manifest(manifest, rows);

  const auto back = read_manifest(manifest);
  ASSERT_EQ(back.size(), utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    EXPECT_EQ(back[i].transcript, utts[i].transcript);
    EXPECT_EQ(back[i].audio.samples.size(), utts[i].audio.samples.size());
  }
}

TEST(Manifest, MalformedLineThrows) {
  const std::string path = testing::TempDir() + "/bad_manifest.tsv";
  std::ofstream out(path);
  out << "no-tab-separator-here\n";
  out.close();
  EXPECT_THROW(read_manifest(path), ParseError);
}

TEST(ConfigFile, ParsesTypedValuesAndRejectsUnknownKeys) {
  std::istringstream in(
      "# a comment\n"
      "model.filters = 25\n"
      "train.lr = 0.005   # inline comment\n"
      "model.padding = same\n"
      "synth.count = 40\n");
  const Config config = Config::parse(in);
  EXPECT_EQ(config.get_int("model.filters", 0), 25);
  EXPECT_DOUBLE_EQ(config.get_double("train.lr", 0.0), 0.005);
  EXPECT_NO_THROW(config.validate_keys(known_config_keys()));

  const CrnnConfig model_config = crnn_config_from(config);
  EXPECT_EQ(model_config.filters, 25);
  EXPECT_EQ(model_config.padding, Padding::kSame);

  std::istringstream bad("model.fliters = 3\n");
  const Config typo = Config::parse(bad);
  EXPECT_THROW(typo.validate_keys(known_config_keys()), ConfigError);

  std::istringstream nonsense("model.filters = abc\n");
  EXPECT_THROW(Config::parse(nonsense).get_int("model.filters", 1),
               ConfigError);
}

}  // namespace
}  // namespace crnn
