"""
Data Manager Module
===================

Handles vote-matrix loading, validation, synthetic scenario generation and
chain persistence.
"""

import io
import json
import logging
import os
import re
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

import config
from modules import distributions as dist
from modules import model
from modules.errors import ChainFormatError, DomainError, VoteDataError
from modules.geometry import spherical_to_cartesian
from modules.sampler import ChainOutput

logger = logging.getLogger(__name__)

SPHERICAL_BLOCKS = ('beta', 'psi', 'zeta', 'omega', 'tau', 'kappa', 'lam')
EUCLIDEAN_BLOCKS = ('mu', 'alpha', 'beta')


@dataclass
class ScenarioSpec:
    """Generator settings for one simulated data set"""
    geometry: str = 'sphere'
    K: int = 2
    I: int = config.SCENARIO_SUBJECTS
    J: int = config.SCENARIO_ITEMS
    precision: float = config.SCENARIO_PRECISION
    kappa: float = config.SCENARIO_KAPPA

    def __post_init__(self):
        if self.geometry not in ('sphere', 'euclidean'):
            raise DomainError(f"Unknown scenario geometry '{self.geometry}'")
        if self.K < 1 or self.I < 1 or self.J < 1:
            raise DomainError("Scenario needs K, I and J of at least 1")
        if self.precision <= 0 or self.kappa <= 0:
            raise DomainError("Scenario precision and kappa must be positive")

    @classmethod
    def from_name(cls, name, **overrides):
        """Parse names such as 'sphere2' or 'euclidean3'"""
        match = re.fullmatch(r'(sphere|euclidean)(\d+)', name.strip().lower())
        if not match:
            raise DomainError(f"Scenario name '{name}' is not of the form sphere<K> or euclidean<K>")
        return cls(geometry=match.group(1), K=int(match.group(2)), **overrides)

    @property
    def name(self):
        return f"{self.geometry}{self.K}"

    def to_dict(self):
        return asdict(self)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_json(payload, path):
    with open(path, 'w') as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write('\n')


class DataManager:
    """Handles vote data loading, validation, scenario generation and chain files"""

    def __init__(self):
        self.votes = None
        self.truth = None
        self.dropped_subjects = []

    # ------------------------------------------------------------------
    # Roll-call ingestion
    # ------------------------------------------------------------------

    @staticmethod
    def _decode(code, row_number):
        key = str(code).strip().lower()
        if key in config.YEA_CODES:
            return 1.0
        if key in config.NAY_CODES:
            return 0.0
        if key in config.MISSING_CODES:
            return np.nan
        raise VoteDataError(f"Unknown vote code '{code}' on row {row_number}")

    def load_vote_matrix(self, path, fmt='csv-wide'):
        """
        Load votes from a wide CSV (first column subject id, one column per
        item) or a long CSV (subject, item, vote). Subjects and items keep
        their file order.
        """
        print("\n" + "=" * 60)
        print("LOADING ROLL CALL DATA")
        print("=" * 60)

        table = pd.read_csv(path, dtype=str, keep_default_na=False)
        if fmt == 'csv-wide':
            votes = self._from_wide(table)
        elif fmt == 'csv-long':
            votes = self._from_long(table)
        else:
            raise VoteDataError(f"Unknown vote file format '{fmt}'")

        self.votes = votes
        self.describe_vote_matrix(votes)
        return votes

    def _from_wide(self, table):
        if table.shape[1] < 2:
            raise VoteDataError("Wide vote file needs a subject column and at least one item column")
        subject_ids = table.iloc[:, 0].tolist()
        if len(set(subject_ids)) != len(subject_ids):
            raise VoteDataError("Duplicate subject ids in wide vote file")
        values = np.empty((len(table), table.shape[1] - 1))
        for r, row in enumerate(table.iloc[:, 1:].itertuples(index=False)):
            values[r] = [self._decode(code, r + 2) for code in row]
        return model.VoteMatrix.from_array(values, subject_ids, list(table.columns[1:]))

    def _from_long(self, table):
        required = {'subject', 'item', 'vote'}
        missing = required - set(table.columns)
        if missing:
            raise VoteDataError(f"Long vote file is missing columns: {sorted(missing)}")
        duplicated = table.duplicated(subset=['subject', 'item'])
        if duplicated.any():
            first = int(np.flatnonzero(duplicated.to_numpy())[0])
            raise VoteDataError(f"Duplicate (subject, item) pair on row {first + 2}")
        codes = [self._decode(code, r + 2) for r, code in enumerate(table['vote'])]
        subjects = list(pd.unique(table['subject']))
        items = list(pd.unique(table['item']))
        wide = (table.assign(value=codes)
                .pivot(index='subject', columns='item', values='value')
                .reindex(index=subjects, columns=items))
        return model.VoteMatrix.from_array(wide.to_numpy(dtype=float), subjects, items)

    def save_vote_matrix(self, votes, path, fmt='csv-wide'):
        if fmt == 'csv-wide':
            frame = pd.DataFrame(votes.as_array(), columns=votes.item_ids)
            frame = frame.apply(lambda col: col.map(lambda v: 'NA' if np.isnan(v) else str(int(v))))
            frame.insert(0, 'subject', votes.subject_ids)
        elif fmt == 'csv-long':
            rows = [(s, v, int(votes.y[i, j]))
                    for i, s in enumerate(votes.subject_ids)
                    for j, v in enumerate(votes.item_ids) if votes.observed[i, j]]
            frame = pd.DataFrame(rows, columns=['subject', 'item', 'vote'])
        else:
            raise VoteDataError(f"Unknown vote file format '{fmt}'")
        frame.to_csv(path, index=False)
        return path

    def filter_low_participation(self, votes, threshold=config.MISSING_THRESHOLD):
        """Drop subjects whose share of missing votes exceeds `threshold`"""
        missing_share = 1.0 - votes.observed.mean(axis=1)
        keep = np.flatnonzero(missing_share <= threshold)
        dropped = [votes.subject_ids[i] for i in np.flatnonzero(missing_share > threshold)]
        if keep.size == 0:
            raise VoteDataError(f"Every subject misses more than {threshold:.0%} of the votes")
        if dropped:
            logger.info(f"Dropped {len(dropped)} subject(s) above {threshold:.0%} missing: {dropped}")
        self.dropped_subjects = dropped
        return votes.subset(rows=keep), dropped

    @staticmethod
    def describe_vote_matrix(votes, verbose=True):
        """Subjects, items and missing-vote count, as in a data summary table"""
        cells = votes.n_subjects * votes.n_items
        summary = {
            'subjects': votes.n_subjects,
            'items': votes.n_items,
            'missing': votes.n_missing,
            'missing_pct': 100.0 * votes.n_missing / cells,
            'yea_share': float(votes.y[votes.observed].mean()) if votes.n_missing < cells else float('nan'),
        }
        if verbose:
            print("✓ Vote matrix ready!")
            print(f"  • Subjects (I): {summary['subjects']:,}")
            print(f"  • Items (J): {summary['items']:,}")
            print(f"  • Missing votes: {summary['missing']:,} ({summary['missing_pct']:.2f}%)")
        return summary

    # ------------------------------------------------------------------
    # Scenario generation
    # ------------------------------------------------------------------

    def simulate_scenario(self, spec, seed):
        """
        Generate a vote matrix and its ground truth.

        Spherical scenarios draw every position from SvM with all precisions
        equal to spec.precision and use kappa_j = spec.kappa; the Euclidean
        scenario draws mu, alpha and beta from standard normals.
        """
        position_rng, vote_rng = (np.random.default_rng(s)
                                  for s in np.random.SeedSequence(seed).spawn(2))
        if spec.geometry == 'sphere':
            precisions = np.full(spec.K, spec.precision)

            def draw(n):
                return spherical_to_cartesian(dist.svm_sample(precisions, position_rng, size=n))

            latent = model.LatentConfiguration(draw(spec.I), draw(spec.J), draw(spec.J))
            hp = model.Hyperparams(spec.precision, spec.precision, np.full(spec.J, spec.kappa),
                                   1.0 / spec.kappa)
            theta = model.theta_matrix(latent, hp)
            truth = {'latent': latent, 'hp': hp, 'theta': theta}
        else:
            params = model.EuclideanParams(
                mu=position_rng.standard_normal(spec.J),
                alpha=position_rng.standard_normal((spec.J, spec.K)),
                beta=position_rng.standard_normal((spec.I, spec.K)),
            )
            theta = model.euclidean_theta_matrix(params)
            truth = {'params': params, 'theta': theta}

        y = (vote_rng.uniform(size=theta.shape) < theta).astype(float)
        votes = model.VoteMatrix(y, np.ones_like(y, dtype=bool))
        self.votes, self.truth = votes, truth
        return votes, truth

    def save_dataset(self, votes, truth, spec, seed, out_dir):
        """Write votes.csv, truth tables and a manifest.json into out_dir"""
        os.makedirs(out_dir, exist_ok=True)
        self.save_vote_matrix(votes, os.path.join(out_dir, 'votes.csv'))
        pd.DataFrame(truth['theta'], index=votes.subject_ids, columns=votes.item_ids).to_csv(
            os.path.join(out_dir, 'truth_theta.csv'), float_format='%.17g')

        if 'latent' in truth:
            tables = {'beta': (truth['latent'].beta, votes.subject_ids),
                      'psi': (truth['latent'].psi, votes.item_ids),
                      'zeta': (truth['latent'].zeta, votes.item_ids)}
        else:
            params = truth['params']
            tables = {'beta': (params.beta, votes.subject_ids),
                      'alpha': (params.alpha, votes.item_ids),
                      'mu': (params.mu[:, None], votes.item_ids)}
        for name, (values, ids) in tables.items():
            frame = pd.DataFrame(values, columns=[f"x{k + 1}" for k in range(values.shape[1])])
            frame.insert(0, 'id', ids)
            frame.to_csv(os.path.join(out_dir, f'truth_{name}.csv'), index=False, float_format='%.17g')

        manifest = {
            'version': config.VERSION,
            'scenario': spec.to_dict(),
            'seed': seed,
            'I': votes.n_subjects,
            'J': votes.n_items,
            'kappa_rule': (f"kappa_j = {spec.kappa} for all items" if spec.geometry == 'sphere'
                           else 'not used (probit link)'),
            'data_hash': votes.data_hash(),
            'summary': self.describe_vote_matrix(votes, verbose=False),
        }
        write_json(manifest, os.path.join(out_dir, 'manifest.json'))
        return out_dir

    # ------------------------------------------------------------------
    # Chain persistence
    # ------------------------------------------------------------------

    @staticmethod
    def _chain_columns(chain):
        names = SPHERICAL_BLOCKS if chain.model == 'spherical' else EUCLIDEAN_BLOCKS
        blocks = []
        for name in names:
            arr = np.asarray(chain.samples[name], dtype=float)
            blocks.append({'name': name, 'shape': list(arr.shape[1:])})
        return blocks

    def save_chain(self, chain, path, fmt='csv'):
        """
        One JSON header line followed by the draws: CSV with one row per kept
        iteration, or raw little-endian float64 records.
        """
        if fmt not in ('csv', 'binary'):
            raise ChainFormatError(f"Unknown chain format '{fmt}'")
        blocks = self._chain_columns(chain)
        n = chain.n_samples
        flat = [np.asarray(chain.loglik, dtype=float).reshape(n, 1)]
        columns = ['loglik']
        for block in blocks:
            arr = np.asarray(chain.samples[block['name']], dtype=float)
            arr = arr.reshape(n, int(np.prod(arr.shape[1:])))
            flat.append(arr)
            width = arr.shape[1]
            columns.extend(f"{block['name']}[{c}]" for c in range(width))
        matrix = np.hstack(flat) if n else np.empty((0, len(columns)))

        header = {
            'version': config.CHAIN_FORMAT_VERSION, 'format': fmt, 'model': chain.model,
            'K': chain.K, 'I': len(chain.subject_ids), 'J': len(chain.item_ids),
            'n_samples': n, 'seed': chain.seed, 'blocks': blocks, 'columns': len(columns),
            'acceptance': chain.acceptance, 'config': chain.config, 'incidents': chain.incidents,
            'data_hash': chain.data_hash, 'subject_ids': chain.subject_ids,
            'item_ids': chain.item_ids,
        }
        header_line = json.dumps(header, sort_keys=True, default=_json_default)
        if fmt == 'csv':
            with open(path, 'w', newline='') as fh:
                fh.write(header_line + '\n')
                pd.DataFrame(matrix, columns=columns).to_csv(fh, index=False, float_format='%.17g')
        else:
            with open(path, 'wb') as fh:
                fh.write(header_line.encode('utf-8') + b'\n')
                fh.write(matrix.astype('<f8').tobytes())
        return path

    def load_chain(self, path):
        with open(path, 'rb') as fh:
            first = fh.readline()
            payload = fh.read()
        try:
            header = json.loads(first.decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ChainFormatError(f"{path}: unreadable chain header") from exc
        if header.get('version') != config.CHAIN_FORMAT_VERSION:
            raise ChainFormatError(
                f"{path}: chain format version {header.get('version')} is not supported "
                f"(expected {config.CHAIN_FORMAT_VERSION})"
            )

        n, width = header['n_samples'], header['columns']
        if header['format'] == 'csv':
            if not payload.strip():
                raise ChainFormatError(f"{path}: chain file is truncated")
            table = pd.read_csv(io.BytesIO(payload), float_precision='round_trip')
            matrix = table.to_numpy(dtype=float)
            if matrix.shape != (n, width) or np.isnan(matrix).any():
                raise ChainFormatError(f"{path}: chain file is truncated or inconsistent")
        elif header['format'] == 'binary':
            if len(payload) != n * width * 8:
                raise ChainFormatError(f"{path}: chain file is truncated or inconsistent")
            matrix = np.frombuffer(payload, dtype='<f8').reshape(n, width).astype(float)
        else:
            raise ChainFormatError(f"{path}: unknown payload format '{header['format']}'")

        samples = {}
        offset = 1
        for block in header['blocks']:
            shape = tuple(block['shape'])
            size = int(np.prod(shape)) if shape else 1
            samples[block['name']] = matrix[:, offset:offset + size].reshape((n,) + shape)
            offset += size
        return ChainOutput(
            model=header['model'], K=header['K'], samples=samples, loglik=matrix[:, 0].copy(),
            acceptance=header['acceptance'], seed=header['seed'], config=header['config'],
            incidents=header['incidents'], data_hash=header['data_hash'],
            subject_ids=header['subject_ids'], item_ids=header['item_ids'],
        )
