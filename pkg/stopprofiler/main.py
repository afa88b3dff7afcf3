# Stop Profiler - Main Entry Point
#
# Pipeline stages run as subcommands and talk through files:
#   synth -> profile -> distmat -> cluster / compare / render
# Exit codes: 0 success, 1 usage error, 2 data error.

import argparse
import sys
from collections import OrderedDict
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from stopprofiler import __version__
from stopprofiler.analyzers.clusterer import (adjusted_rand_index,
                                              describe_clusters, kmeans,
                                              kmedoids)
from stopprofiler.analyzers.distance_metrics import (DistanceMatrix,
                                                     MetricKind,
                                                     canonical_location_values,
                                                     metric_distance_matrix,
                                                     select)
from stopprofiler.analyzers.metric_comparator import correlation_matrix
from stopprofiler.analyzers.profile_builder import (DiurnalProfile, Grouping,
                                                    Measure, ProportionProfile,
                                                    aggregate_counts,
                                                    eligible_stops,
                                                    order_by_global_seq,
                                                    stop_diurnal_profiles,
                                                    to_proportions,
                                                    volume_summary,
                                                    weekly_day_totals)
from stopprofiler.collectors.base_collector import BaseCollector
from stopprofiler.collectors.event_reader import (EventFileCollector,
                                                  FilterCriteria)
from stopprofiler.collectors.synthetic_collector import (SynthConfig,
                                                         SyntheticCollector)
from stopprofiler.core.apc import (Direction, ServicePeriod, StopEvent,
                                   route_flow_imbalance)
from stopprofiler.core.errors import DataError, StopProfilerError, UsageError
from stopprofiler.publishers.csv_exporter import (ProfileTable, read_matrix,
                                                  read_partition,
                                                  read_profiles,
                                                  write_clusters,
                                                  write_correlation,
                                                  write_matrix,
                                                  write_profiles, write_table,
                                                  write_yaml)
from stopprofiler.publishers.heatmap_renderer import (HeatmapSpec,
                                                      ImageFormat,
                                                      MatrixOrdering,
                                                      curve_export, heatmap,
                                                      resolve_ordering)
from stopprofiler.publishers.run_manifest import (RunManifest,
                                                  manifest_path_for)
from stopprofiler.utils.config_loader import ConfigLoader
from stopprofiler.utils.logger import get_logger, setup_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

METRIC_CHOICES = [m.value for m in MetricKind]


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


class StopProfiler:
    """The pipeline behind the command line"""

    def __init__(self, config_path: Optional[str] = None, log_level: Optional[str] = None):
        """
        Args:
            config_path: Config file or directory (default: config/)
            log_level: Overrides logging.level from the config
        """
        self.config_loader = ConfigLoader(config_path)
        setup_logging(self.config_loader.logging_config, log_level)
        self.logger = get_logger("main")

        self.analysis = self.config_loader.analysis_config
        self.render_config = self.config_loader.render_config
        self.threads = self.config_loader.threads

    # ---------- shared helpers ----------

    def _setting(self, value: Any, key: str, default: Any, section: Optional[Dict] = None) -> Any:
        """Flag value, else config value, else built-in default"""
        if value is not None:
            return value
        section = self.analysis if section is None else section
        return section.get(key, default)

    def _measure(self, args) -> Measure:
        return Measure.parse(self._setting(args.measure, "measure", "boardings"))

    @staticmethod
    def _criteria(args) -> FilterCriteria:
        period = None
        if args.start or args.end or args.weekdays_only:
            start = BaseCollector._parse_date(args.start) if args.start else date.min
            end = BaseCollector._parse_date(args.end) if args.end else date.max
            period = ServicePeriod(label="cli", start_date=start, end_date=end,
                                   weekdays_only=args.weekdays_only)
        try:
            direction = Direction.parse(args.direction) if args.direction else None
        except ValueError as e:
            raise UsageError(f"--direction: {e}") from e
        return FilterCriteria(
            route_id=args.route,
            direction=direction,
            period=period,
            variation_ids=frozenset(args.variation) if args.variation else None
        )

    @staticmethod
    def _filter_parameters(args) -> Dict[str, Any]:
        return {
            'route': args.route,
            'direction': args.direction,
            'start': args.start,
            'end': args.end,
            'weekdays_only': args.weekdays_only,
            'variations': list(args.variation or [])
        }

    def _cohort(self, args) -> List[StopEvent]:
        return EventFileCollector(args.events, self._criteria(args)).collect()

    def _eligible_proportions(self, events: Sequence[StopEvent], measure: Measure,
                              min_total: float) -> Tuple[Dict[str, ProportionProfile], Dict, List[str]]:
        """Proportion curves of eligible stops, ordered by global sequence"""
        profiles = stop_diurnal_profiles(events, measure)
        infos = canonical_location_values(events)
        keep = eligible_stops(profiles, min_total)
        order = order_by_global_seq(keep, infos)
        self.logger.info(f"{len(order)} of {len(profiles)} stops reach {min_total} {measure.value}")
        return {s: to_proportions(profiles[s]) for s in order}, infos, order

    def _profile_source(self, args) -> ProfileTable:
        """Curves and locations from --profiles, else built from --events"""
        if args.profiles:
            return read_profiles(args.profiles)
        if not args.events:
            raise UsageError("one of --profiles or --events is required")
        measure = self._measure(args)
        min_total = float(self._setting(args.min_total, "min_total", 50))
        proportions, infos, order = self._eligible_proportions(self._cohort(args), measure, min_total)
        return ProfileTable(
            curves=OrderedDict((s, proportions[s].proportions) for s in order),
            infos=OrderedDict((s, infos[s]) for s in order),
            totals={s: proportions[s].source_total for s in order}
        )

    @staticmethod
    def _write_manifest(args, argv: Sequence[str], output: Path, inputs: Dict, outputs: Dict,
                        parameters: Dict) -> Path:
        manifest = RunManifest(command=args.command, argv=list(argv), inputs=inputs,
                               outputs=outputs, parameters=parameters)
        return manifest.write(manifest_path_for(output))

    # ---------- commands ----------

    def synth(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        section = dict(self.config_loader.synth_config)
        overrides = {
            "n_stops": args.stops,
            "n_weekdays": args.weekdays,
            "noise_scale": args.noise,
            "seed": args.seed,
            "volume_log_mean": args.volume_log_mean,
            "volume_log_sd": args.volume_log_sd,
            "deterministic": args.deterministic or None,
        }
        if args.archetypes:
            section["archetypes"] = [a.strip() for a in args.archetypes.split(",") if a.strip()]
            section.pop("mixture_weights", None)
        section.update({k: v for k, v in overrides.items() if v is not None})
        section.setdefault("seed", self.analysis.get("seed", 0))

        collector = SyntheticCollector(SynthConfig.from_dict(section))
        collector.collect()
        out_dir = Path(args.out)
        paths = collector.output.write(out_dir)
        self._write_manifest(args, argv, out_dir, {},
                             {k: str(v) for k, v in paths.items()},
                             collector.synth_config.to_dict())
        return {"events": len(collector.output.events), "stops": len(collector.output.ground_truth)}

    def profile(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        measure = self._measure(args)
        min_total = float(self._setting(args.min_total, "min_total", 50))
        events = self._cohort(args)
        profiles = stop_diurnal_profiles(events, measure)
        infos = canonical_location_values(events)
        order = order_by_global_seq(eligible_stops(profiles, min_total), infos)
        chosen: Dict[str, Any] = profiles
        if args.proportions:
            chosen = {s: to_proportions(profiles[s]) for s in order}
        out = write_profiles(chosen, infos, order, args.out)

        parameters = {'measure': measure.value, 'min_total': min_total,
                      'proportions': bool(args.proportions), **self._filter_parameters(args)}
        self._write_manifest(args, argv, out, {'events': args.events}, {'profiles': str(out)}, parameters)
        return {"stops": len(order), "excluded": len(profiles) - len(order)}

    def distmat(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        kind = MetricKind.parse(args.metric)
        table = self._profile_source(args)
        geographic_mode = self._setting(args.geographic_mode, "geographic_mode", "planar")
        matrix = metric_distance_matrix(kind, table.stop_ids, curves=table.curves, infos=table.infos,
                                        geographic_mode=geographic_mode, threads=self.threads)
        out = write_matrix(matrix, args.out)

        parameters = {'metric': kind.value, 'geographic_mode': geographic_mode}
        if not args.profiles:
            parameters.update(measure=self._measure(args).value,
                              min_total=float(self._setting(args.min_total, "min_total", 50)),
                              **self._filter_parameters(args))
        inputs = {'profiles': args.profiles} if args.profiles else {'events': args.events}
        self._write_manifest(args, argv, out, inputs, {'distmat': str(out)}, parameters)
        return {"stops": matrix.size, "metric": kind.value}

    def cluster(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        k = int(self._setting(args.k, "k", 4))
        seed = int(self._setting(args.seed, "seed", 0))
        max_iter = int(self._setting(args.max_iter, "max_iter", 100))
        n_init = int(self._setting(args.n_init, "n_init", 10))
        if bool(args.distmat) == bool(args.profiles):
            raise UsageError("exactly one of --distmat or --profiles is required")

        table = read_profiles(args.profiles) if args.profiles else None
        if args.algo == "kmeans":
            if table is None:
                raise UsageError("--algo kmeans needs --profiles (it clusters curves)")
            result = kmeans([table.curves[s] for s in table.stop_ids], k, seed, max_iter,
                            labels=table.stop_ids, n_init=n_init)
        else:
            if table is None:
                matrix = read_matrix(args.distmat)
            else:
                matrix = metric_distance_matrix(MetricKind.parse(args.metric), table.stop_ids,
                                                curves=table.curves, infos=table.infos,
                                                threads=self.threads)
            result = kmedoids(matrix, k, seed)

        out = write_clusters(result, args.out)
        if table is not None:
            for summary in describe_clusters(result, table.curves):
                self.logger.info(f"cluster {summary.cluster}: {summary.size} stops, "
                                 f"peaks at {list(summary.peak_hours)}")

        parameters = {'algo': args.algo, 'k': k, 'seed': seed}
        if args.algo == "kmeans":
            parameters.update(max_iter=max_iter, n_init=n_init)
        elif table is not None:
            parameters['metric'] = args.metric
        inputs = {'profiles': args.profiles} if args.profiles else {'distmat': args.distmat}
        self._write_manifest(args, argv, out, inputs, {'clusters': str(out)}, parameters)
        return result.metadata()

    def compare(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        matrices = [read_matrix(p) for p in args.distmat]
        common = [s for s in matrices[0].labels if all(s in set(m.labels) for m in matrices[1:])]
        dropped = {m.metric.value: m.size - len(common) for m in matrices if m.size != len(common)}
        if dropped:
            self.logger.warning(f"comparing on {len(common)} common stops; dropped {dropped}")
        aligned = [select(m, common) for m in matrices]
        correlation = correlation_matrix(aligned, threads=self.threads)
        out = write_correlation(correlation, args.out)
        self._write_manifest(args, argv, out, {'distmat': list(args.distmat)}, {'correlation': str(out)},
                             {'stops': len(common), 'metrics': correlation.names})
        return {"metrics": correlation.names, "stops": len(common)}

    def _locations(self, args) -> Tuple[Optional[Dict], Optional[List[StopEvent]]]:
        events = self._cohort(args) if args.events else None
        if args.profiles:
            return read_profiles(args.profiles).infos, events
        if events is not None:
            return canonical_location_values(events), events
        return None, None

    def render(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        matrix: DistanceMatrix = read_matrix(args.distmat)
        ordering = MatrixOrdering.parse(args.order)
        fmt = ImageFormat(self._setting(args.format, "format", "pgm", self.render_config))
        invert = self._setting(args.invert, "invert", True, self.render_config)

        infos, events = self._locations(args)
        if ordering.by_global_seq and infos is None:
            # matrices are written in global sequence order
            permutation = list(range(matrix.size))
        else:
            permutation = resolve_ordering(ordering, matrix.labels, infos, events)

        spec = HeatmapSpec(
            matrix=matrix,
            ordering=ordering,
            format=fmt,
            invert=bool(invert),
            permutation=tuple(permutation),
            value_range=tuple(args.range) if args.range else None,
            cell_size=int(self.render_config.get("svg_cell_size", 8))
        )
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(heatmap(spec))

        parameters = {'order': str(ordering), 'format': fmt.value, 'invert': bool(invert),
                      'range': list(args.range) if args.range else None}
        inputs = {'distmat': args.distmat, 'events': args.events, 'profiles': args.profiles}
        self._write_manifest(args, argv, out, inputs, {'heatmap': str(out)}, parameters)
        return {"stops": matrix.size, "format": fmt.value}

    def curves(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        table = read_profiles(args.profiles)
        proportions = {
            s: to_proportions(DiurnalProfile(stop_id=s, measure=Measure.BOARDINGS, counts=curve))
            for s, curve in table.curves.items()
        }
        ordering = MatrixOrdering.parse(args.order)
        events = self._cohort(args) if args.events else None
        labels = table.stop_ids
        order = [labels[i] for i in resolve_ordering(ordering, labels, table.infos, events)]

        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(curve_export(proportions, order))
        self._write_manifest(args, argv, out, {'profiles': args.profiles, 'events': args.events},
                             {'curves': str(out)}, {'order': str(ordering)})
        return {"stops": len(order)}

    def summary(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        measure = self._measure(args)
        min_total = float(self._setting(args.min_total, "min_total", 50))
        low = float(self._setting(args.low_threshold, "low_volume_threshold", 10))
        events = self._cohort(args)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)

        outputs = {}
        for grouping, name in ((Grouping.BY_DAY_OF_WEEK, "by_day.csv"), (Grouping.BY_HOUR, "by_hour.csv"),
                               (Grouping.BY_DAY_OF_WEEK_AND_HOUR, "by_day_hour.csv")):
            frame = aggregate_counts(events, grouping, measure).to_frame()
            index = grouping is Grouping.BY_DAY_OF_WEEK_AND_HOUR
            outputs[grouping.value] = str(write_table(frame, out_dir / name, index=index))
        outputs['weekly'] = str(write_table(weekly_day_totals(events, measure), out_dir / "weekly_day_totals.csv",
                                            index=True))

        infos = canonical_location_values(events)
        stops = pd.DataFrame([infos[s].to_dict() for s in order_by_global_seq(infos, infos)])
        outputs['stops'] = str(write_table(stops, out_dir / "stops.csv"))

        flows = route_flow_imbalance(events)
        negative = sum(1 for v in flows.values() if v < 0)
        if negative:
            self.logger.warning(f"{negative} of {len(flows)} trips lose more riders than they board")
        imbalance = pd.DataFrame({"trip_id": list(flows.keys()), "net_flow": list(flows.values())})
        outputs['imbalance'] = str(write_table(imbalance, out_dir / "trip_imbalance.csv"))

        profiles = stop_diurnal_profiles(events, measure)
        volumes = volume_summary(profiles, low_threshold=low, min_total=min_total)
        outputs['volume'] = str(write_yaml(volumes.to_dict(), out_dir / "volume_summary.yaml"))

        parameters = {'measure': measure.value, 'min_total': min_total, 'low_threshold': low,
                      **self._filter_parameters(args)}
        self._write_manifest(args, argv, out_dir, {'events': args.events}, outputs, parameters)
        return volumes.to_dict()

    def score(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        clusters = read_partition(args.clusters)
        truth = read_partition(args.truth)
        common = [s for s in clusters if s in truth]
        if not common:
            raise DataError(f"{args.clusters} and {args.truth} share no stops")
        ari = adjusted_rand_index([clusters[s] for s in common], [truth[s] for s in common])
        print(f"{ari:.12g}")
        target = args.out or Path(args.clusters).with_suffix(".score.yaml")
        out = write_yaml({'ari': ari, 'stops': len(common)}, target)
        self._write_manifest(args, argv, out, {'clusters': args.clusters, 'truth': args.truth},
                             {'score': str(out)}, {})
        return {"ari": ari, "stops": len(common)}

    def dispatch(self, args, argv: Sequence[str]) -> Dict[str, Any]:
        handler = getattr(self, args.command)
        self.logger.info(f"stopprofiler {__version__}: {args.command}")
        result = handler(args, argv)
        self.logger.info(f"{args.command} done: {result}")
        return result


def _add_filter_flags(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--events", required=required, help="Event CSV (.gz allowed)")
    parser.add_argument("--route", help="Keep one route_id")
    parser.add_argument("--direction", help="I or O")
    parser.add_argument("--start", help="First service date, YYYY-MM-DD")
    parser.add_argument("--end", help="Last service date, YYYY-MM-DD")
    parser.add_argument("--weekdays-only", action="store_true", help="Drop weekend service dates")
    parser.add_argument("--variation", action="append", help="Keep a route variation (repeatable)")


def _add_volume_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--measure", choices=[m.value for m in Measure], help="Count to profile")
    parser.add_argument("--min-total", type=float, help="Eligibility threshold, inclusive (default 50)")


def build_parser() -> CliParser:
    parser = CliParser(prog="stopprofiler", description="Stop-level ridership profiles from APC events")
    parser.add_argument("--config", help="Config file or directory")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    p = commands.add_parser("synth", help="Generate synthetic events with planted archetypes")
    p.add_argument("--stops", type=int)
    p.add_argument("--archetypes", help="Comma-separated builtin archetype names")
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--weekdays", type=int, help="Number of service weekdays")
    p.add_argument("--volume-log-mean", type=float)
    p.add_argument("--volume-log-sd", type=float)
    p.add_argument("--deterministic", action="store_true", help="Use expected counts instead of draws")
    p.add_argument("--out", required=True, help="Output directory")

    p = commands.add_parser("profile", help="Per-stop 24-hour curves")
    _add_filter_flags(p)
    _add_volume_flags(p)
    p.add_argument("--proportions", action="store_true", help="Divide each curve by its total")
    p.add_argument("--out", required=True)

    p = commands.add_parser("distmat", help="Pairwise stop distance matrix")
    p.add_argument("--profiles", help="Profiles CSV")
    _add_filter_flags(p, required=False)
    _add_volume_flags(p)
    p.add_argument("--metric", required=True, choices=METRIC_CHOICES)
    p.add_argument("--geographic-mode", choices=["planar", "haversine"])
    p.add_argument("--out", required=True)

    p = commands.add_parser("cluster", help="k-means over curves or k-medoids over a matrix")
    p.add_argument("--distmat")
    p.add_argument("--profiles")
    p.add_argument("--algo", choices=["kmeans", "kmedoids"], default="kmeans")
    p.add_argument("--metric", choices=METRIC_CHOICES, default=MetricKind.CURVE_BAND.value,
                   help="Metric for kmedoids over --profiles")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--n-init", type=int, help="k-means starts, best objective kept (default 10)")
    p.add_argument("--out", required=True)

    p = commands.add_parser("compare", help="Spearman's rho between distance matrices")
    p.add_argument("--distmat", action="append", required=True, help="Matrix CSV (repeat)")
    p.add_argument("--out", required=True)

    p = commands.add_parser("render", help="Distance-matrix heatmap")
    p.add_argument("--distmat", required=True)
    p.add_argument("--order", default="gseq", help="gseq or variation:<id>")
    p.add_argument("--format", choices=[f.value for f in ImageFormat])
    p.add_argument("--invert", action=argparse.BooleanOptionalAction, default=None,
                   help="Darker = smaller distance (default on)")
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"), help="Shared value range")
    p.add_argument("--profiles", help="Profiles CSV for gseq ordering")
    _add_filter_flags(p, required=False)
    p.add_argument("--out", required=True)

    p = commands.add_parser("curves", help="Proportion curves for plotting")
    p.add_argument("--profiles", required=True)
    p.add_argument("--order", default="gseq", help="gseq or variation:<id>")
    _add_filter_flags(p, required=False)
    p.add_argument("--out", required=True)

    p = commands.add_parser("summary", help="Route-level tables and volume diagnostics")
    _add_filter_flags(p)
    _add_volume_flags(p)
    p.add_argument("--low-threshold", type=float, help="Very-low-volume cutoff (default 10)")
    p.add_argument("--out", required=True, help="Output directory")

    p = commands.add_parser("score", help="Adjusted Rand index between two partitions")
    p.add_argument("--clusters", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", help="YAML result (default: <clusters>.score.yaml)")

    p = commands.add_parser("rerun", help="Repeat the command recorded in a run manifest")
    p.add_argument("--manifest", required=True)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Exit code
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"stopprofiler: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)

    if args.command == "rerun":
        try:
            manifest = RunManifest.load(args.manifest)
        except StopProfilerError as e:
            print(f"stopprofiler: {e}", file=sys.stderr)
            return EXIT_DATA
        if manifest.command == "rerun":
            print("stopprofiler: a manifest cannot record rerun", file=sys.stderr)
            return EXIT_USAGE
        return run(manifest.argv)

    try:
        StopProfiler(args.config, args.log_level).dispatch(args, argv)
    except UsageError as e:
        print(f"stopprofiler {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, ValueError) as e:
        print(f"stopprofiler {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
