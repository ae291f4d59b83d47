from pmc.selection.records import FUSED_WEIGHTS, PseudoRecord, late_fusion, make_pseudo_records, records_from_probs
from pmc.selection.curriculum import CurriculumState, StreamSchedule, scaled_ratio, selection_count, update_proportion
from pmc.selection.selector import MIS, SelectionEntry, SelectionSet, mis_select, mss_origin, mss_select
from pmc.selection.boxes import ScoredBox, iou, nms, select_boxes
from pmc.selection.audit import AUDIT_COLUMNS, append_audit, audit_frame
