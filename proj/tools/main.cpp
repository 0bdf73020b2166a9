#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "reid/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Siamese row-sequence LSTM for person re-identification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string image_id;

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic feature set");
  synth->add_option("--config", config_path, "JSON config file")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config_path, "JSON config file")->required();

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a trained model");
  eval->add_option("--config", config_path, "JSON config file")->required();

  CLI::App* inspect = app.add_subcommand("inspect", "Export gate activation traces");
  inspect->add_option("--config", config_path, "JSON config file")->required();
  inspect->add_option("--image-id", image_id, "Image id to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const nlohmann::json cfg = reid::cli::load_config(config_path);
    if (synth->parsed()) {
      reid::cli::cmd_synth(cfg);
    } else if (train->parsed()) {
      reid::cli::cmd_train(cfg);
    } else if (eval->parsed()) {
      reid::cli::cmd_eval(cfg);
    } else if (inspect->parsed()) {
      reid::cli::cmd_inspect(cfg, image_id);
    }
  } catch (const reid::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const reid::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const reid::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
